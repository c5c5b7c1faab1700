//! K from synthetic decaying variance tables against K_0 and the bound.

use orbit_sff::potts::{bound_validation, PottsParams};

fn main() -> orbit_sff::Result<()> {
    let p = PottsParams::from_chi(3, 1.0, 0.9)?;
    let times: Vec<u32> = (2..=200).collect();
    for (eta, theta) in [(0.5, 1.0), (0.3, 0.5), (0.8, 2.0)] {
        let fam = bound_validation(&p, eta, theta, &times)?;
        println!(
            "eta = {eta}, theta = {theta}: a = {:.4}, A = {:.4}",
            fam.a, fam.big_a
        );
        for r in fam
            .rows
            .iter()
            .filter(|r| [2, 5, 10, 20, 50, 100, 200].contains(&r.t))
        {
            println!(
                "  T = {:>3}: K = {:>10.3}, |K - K0| = {:.3e}, bound = {:.3e}",
                r.t, r.k, r.deviation, r.bound
            );
        }
        println!("  holds everywhere: {}", fam.all_hold());
    }
    Ok(())
}
