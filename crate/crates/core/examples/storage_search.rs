//! Search for a quadratic storage matrix when none is known.

use dissipacert::certify::{check_l2_lti, find_storage_p, SearchOptions, StorageTarget};
use dissipacert::supply::SupplyRate;
use dissipacert::sysmodel::{LtiSystem, StorageScale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LtiSystem::diagonal(&[-1.0, -0.5], &[1.0, 2.0], &[1.0, 0.5])?;
    let opts = SearchOptions::default();

    let ni = StorageTarget::Supply {
        sr: SupplyRate::ni(2),
        scale: StorageScale::Half,
        t: None,
    };
    let r = find_storage_p(&sys, &ni, &opts)?;
    println!(
        "NI: feasible {} after {} iterations, P = {:?}",
        r.feasible,
        r.iterations,
        r.p.to_rows()
    );

    // the H∞ norm is 2, so γ = 1.9 is infeasible and γ = 2.1 is not
    for gamma in [1.9, 2.1] {
        let r = find_storage_p(&sys, &StorageTarget::L2 { gamma }, &opts)?;
        println!("γ = {gamma}: feasible {}, λ_max {:e}", r.feasible, r.margin);
        if r.feasible {
            println!("  check: {}", check_l2_lti(&sys, &r.p, gamma, 1e-9)?.verdict);
        }
    }
    Ok(())
}
