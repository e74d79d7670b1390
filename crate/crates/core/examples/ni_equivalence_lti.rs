//! NI and bounded-real LMIs for a diagonal LTI system, and the residual
//! condition under which their verdicts coincide.

use dissipacert::certify::{check_equivalence_thm39, check_l2_lti, check_ni_lti, thm39_residual};
use dissipacert::matcore::SymMatrix;
use dissipacert::sysmodel::LtiSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LtiSystem::diagonal(&[-1.0, -0.5], &[1.0, 2.0], &[1.0, 0.5])?;
    // p_i = √(4 − 2a_i²) / b_i² zeroes the residual
    let p = SymMatrix::from_diagonal(&[2f64.sqrt(), 14f64.sqrt() / 8.0]);
    println!("residual ‖R(P)‖ = {:e}", thm39_residual(&sys, &p)?.frobenius());

    let ni = check_ni_lti(&sys, &p, 1e-9)?;
    let l2 = check_l2_lti(&sys, &p, 1.0, 1e-9)?;
    println!("NI {} (max eig {})", ni.verdict, ni.margins[0].value);
    println!("L2 {} (max eig {})", l2.verdict, l2.margins[0].value);

    let eq = check_equivalence_thm39(&sys, &p, 1e-9)?;
    println!("equivalence: {}", eq.conclusion);
    Ok(())
}
