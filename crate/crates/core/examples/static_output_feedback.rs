//! Static output feedback u = −2Ay and the strict dissipativity LMI of the
//! closed loop.

use dissipacert::certify::{check_sof_thm44, optimal_feedback, SofOptions};
use dissipacert::matcore::{general_eigenvalues, SymMatrix};
use dissipacert::sysmodel::LtiSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LtiSystem::diagonal(&[1.0, 2.0], &[1.0, 0.5], &[1.0, 2.0])?;
    let law = optimal_feedback(&sys, 0.5, 0)?;
    println!("K = {}", law.k);
    let a_cl = &sys.a + &sys.b * &law.k * &sys.c;
    println!("closed-loop eigenvalues {:?}", general_eigenvalues(&a_cl)?);

    let opts = SofOptions {
        beta: Some(0.5),
        p: Some(SymMatrix::identity(2)),
        t: Some(SymMatrix::from_diagonal(&[0.5, 3.75])),
    };
    let cert = check_sof_thm44(&sys, &opts, 1e-9)?;
    println!("{}: {}", cert.verdict, cert.conclusion);
    for m in &cert.margins {
        println!("  {} = {}", m.name, m.value);
    }

    // without P, T or β the check picks them itself
    let auto = check_sof_thm44(&sys, &SofOptions::default(), 1e-9)?;
    println!("automatic: {} with β = {:?}", auto.verdict, auto.witness.beta);
    Ok(())
}
