//! Continues a pair of periodic orbits into the coupled system and checks
//! that their action difference is eps * Phi up to second order.

use orbit_sff::classical::SystemSpec;
use orbit_sff::orbits::{family_iterator, ShiftVector};
use orbit_sff::semiclassics::action_difference_identity_check;

fn main() -> orbit_sff::Result<()> {
    let spec = SystemSpec::ring(2, 0.0);
    let t = 5;
    let fam = family_iterator(&spec, t)?
        .find(|f| f.reps.iter().all(|o| o.primitive_period == t))
        .expect("primitive family");
    let eps = [1e-2, 1e-3, 1e-4, 1e-5];
    let rep = action_difference_identity_check(
        &fam,
        &ShiftVector::zero(2, t),
        &ShiftVector::new(&[0, 2], t),
        &spec,
        &eps,
    )?;
    println!("T = {t}, Phi = {:.6}", rep.phi);
    println!(
        "{:>8} {:>14} {:>12} {:>6}",
        "eps", "Delta", "residual", "iters"
    );
    for i in 0..eps.len() {
        println!(
            "{:>8.0e} {:>14.6e} {:>12.3e} {:>6}",
            rep.epsilons[i], rep.deltas[i], rep.residuals[i], rep.newton_iterations[i]
        );
    }
    println!("fitted exponent {:.4}", rep.exponent.unwrap_or(f64::NAN));
    Ok(())
}
