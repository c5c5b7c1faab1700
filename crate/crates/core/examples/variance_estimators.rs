//! Phase variance from the long-time average and from the correlation series.

use orbit_sff::classical::SystemSpec;
use orbit_sff::orbits::ShiftVector;
use orbit_sff::semiclassics::{
    per_bond_variance_table, variance_series, variance_time_average, GeometricCorrelations,
    MonteCarloCorrelations, VarianceEstimator,
};

fn main() -> orbit_sff::Result<()> {
    let spec = SystemSpec::ring(2, 0.0);
    let s = [0i64, 1];

    let ta = variance_time_average(&spec, &ShiftVector::new(&s, 16), 8, 100_000, 1)?;
    println!("time average:");
    for r in &ta.ladder {
        println!(
            "  H = {:>3}: {:.4} +- {:.4}",
            r.horizon, r.value, r.std_error
        );
    }
    println!(
        "  extrapolated {:.4} +- {:.4}, plateau {}",
        ta.sigma2, ta.std_error, ta.plateau
    );

    let mc = MonteCarloCorrelations {
        obs: &spec,
        map: spec.map,
        samples: 100_000,
        seed: 2,
    };
    let se = variance_series(&mc, &s, 4)?;
    println!(
        "correlation series: {:.4} +- {:.4} (tail bound {:.1e})",
        se.sigma2, se.std_error, se.truncation_bound
    );

    let geo = GeometricCorrelations {
        sites: 2,
        c0: 1.0,
        eta: 0.5,
    };
    println!(
        "geometric model, eta = 0.5: {:.12} (exact 6)",
        variance_series(&geo, &s, 60)?.sigma2
    );

    let ring3 = SystemSpec::ring(3, 0.0);
    let est = VarianceEstimator::TimeAverage {
        horizon: 4,
        samples: 50_000,
    };
    let table = per_bond_variance_table(&ring3, 6, est, 3)?;
    println!("per-bond table, L = 3, T = 6:");
    for e in &table.entries {
        println!("  s = {:?}: {:.4} +- {:.4}", e.key, e.sigma2, e.std_error);
    }
    Ok(())
}
