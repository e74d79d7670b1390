//! Grid certificates for an input-affine system with a symbolic storage
//! function, including the (L, W) factorization at certified points.

use dissipacert::certify::{check_dissipative_affine, check_l2_affine, check_ni_family_affine, NiFamily};
use dissipacert::expr;
use dissipacert::supply::{L2Supply, SupplyRate};
use dissipacert::sysmodel::{AffineSystem, GridSpec, StorageCandidate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // ẋ = −x − x³ + u, y = x
    let sys = AffineSystem::parse(1, &["-x1 - x1^3"], &[vec!["1".to_string()]], &["x1"])?;
    let grid = GridSpec::uniform(2.0, 41);

    let v = StorageCandidate::symbolic(expr::parse("x1^2", 1)?, 1);
    let l2 = check_l2_affine(&sys, &v, L2Supply::new(1.0)?, &grid, 1e-9)?;
    println!("L2 gain ≤ 1 with V = x²: {}", l2.verdict);

    let v_half = StorageCandidate::symbolic(expr::parse("0.5*x1^2", 1)?, 1);
    let ni = check_ni_family_affine(&sys, &v_half, NiFamily::Ni, &grid, 1e-9)?;
    println!("NI with V = ½x²: {}", ni.verdict);
    if let Some(w) = &ni.worst_point {
        println!("  worst point x = {:?}, violation {:e}", w.x, w.violation);
    }

    // with s = x + x³ the slack is (1 − δ)(u − s)², so δ ≤ 1 passes
    let v_quartic = StorageCandidate::symbolic(expr::parse("0.25*x1^4 + 0.5*x1^2", 1)?, 1);
    for delta in [0.5, 2.0] {
        let d = check_dissipative_affine(&sys, &SupplyRate::osni(1, delta)?, &v_quartic, &grid, 1e-9)?;
        println!("O-SNI(δ = {delta}) with V = ¼x⁴ + ½x²: {}", d.verdict);
    }
    let d = check_dissipative_affine(&sys, &SupplyRate::osni(1, 0.5)?, &v_quartic, &grid, 1e-9)?;
    for s in &d.lw_samples {
        println!("  at x = {:?}: q = {}, L = {:?}, W = {:?}", s.x, s.q, s.l, s.w);
    }
    for h in &d.hypotheses {
        println!("  {:?}: {}", h.status, h.name);
    }
    Ok(())
}
