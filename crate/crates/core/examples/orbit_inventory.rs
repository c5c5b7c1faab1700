//! Periodic points of the cat map: counts, orbits and the sum rule.
//!
//!     cargo run --release --example orbit_inventory [T_max] [inventory.csv]

use orbit_sff::orbits::{
    enumerate_periodic_points, group_into_orbits, stability_amplitude_sq, sum_rule_check,
    trace_minus_two, write_orbit_inventory,
};
use orbit_sff::torus::CatMapSpec;

fn main() -> orbit_sff::Result<()> {
    let mut args = std::env::args().skip(1);
    let t_max: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    let inventory = args.next();
    let m = CatMapSpec::ARNOLD;

    println!(
        "{:>3} {:>8} {:>12} {:>7} {:>10} {:>12}",
        "T", "points", "|tr M^T-2|", "orbits", "A^2", "sum A^2 - 1"
    );
    let mut all = Vec::new();
    for t in 1..=t_max {
        let pts = enumerate_periodic_points(t, &m)?;
        let orbits = group_into_orbits(&pts, t, &m)?;
        println!(
            "{t:>3} {:>8} {:>12} {:>7} {:>10.3e} {:>12.1e}",
            pts.len(),
            trace_minus_two(&m, t)?.abs(),
            orbits.len(),
            stability_amplitude_sq(t, &m)?,
            sum_rule_check(t, &m)? - 1.0
        );
        all.extend(orbits);
    }

    if let Some(path) = inventory {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["T", "num_q", "num_p", "den", "primitive_period"])?;
        write_orbit_inventory(&mut w, &all)?;
        w.flush().ok();
        eprintln!("{} orbits written to {path}", all.len());
    }
    Ok(())
}
