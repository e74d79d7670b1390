//! Simulate, audit the dissipation inequality along trajectories, and
//! estimate the L2 gain from a sinusoid sweep.

use dissipacert::matcore::SymMatrix;
use dissipacert::simulate::{
    audit_dissipation, empirical_l2_gain, integrate, integrate_feedback, random_piecewise, sinusoid_sweep, write_csv,
};
use dissipacert::supply::SupplyRate;
use dissipacert::sysmodel::{LtiSystem, StorageCandidate, StorageScale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LtiSystem::diagonal(&[1.0, 2.0], &[1.0, 0.5], &[1.0, 2.0])?;
    let k = &sys.a * -2.0;
    let traj = integrate_feedback(&sys, &k, &[1.0, -1.0], 1e-3, 5.0)?;
    let v = StorageCandidate::quadratic(SymMatrix::identity(2), StorageScale::One);
    let audit = audit_dissipation(&traj, &SupplyRate::beta(2, 0.5)?, &v)?;
    println!(
        "closed loop: worst violation {:e} at t = {}",
        audit.max_violation, audit.max_at
    );

    let stable = LtiSystem::diagonal(&[-1.0, -0.5], &[1.0, 2.0], &[1.0, 0.5])?;
    let u = random_piecewise(2, 10, 5.0, 1.0, 7);
    let traj = integrate(&stable, &u, &[0.0, 0.0], 1e-3, 5.0)?;
    let p = SymMatrix::from_diagonal(&[2.0, 0.25]);
    let audit = audit_dissipation(
        &traj,
        &SupplyRate::ni(2),
        &StorageCandidate::quadratic(p, StorageScale::Half),
    )?;
    println!("open loop NI audit: worst violation {:e}", audit.max_violation);

    let ens = sinusoid_sweep(2, &[0.01, 0.1, 1.0], &[0.0, std::f64::consts::FRAC_PI_2]);
    let g = empirical_l2_gain(&stable, &ens, 1e-2, 200.0)?;
    println!("empirical L2 gain {:.4} (input #{:?})", g.gain, g.argmax);

    let mut head = Vec::new();
    write_csv(&mut head, &traj, Some(&audit))?;
    let text = String::from_utf8(head)?;
    for line in text.lines().take(3) {
        println!("{line}");
    }
    Ok(())
}
