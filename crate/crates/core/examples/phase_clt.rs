//! Distribution of the rescaled phase difference over periodic points.
//!
//!     cargo run --release --example phase_clt [samples]

use orbit_sff::classical::SystemSpec;
use orbit_sff::orbits::ShiftVector;
use orbit_sff::semiclassics::{
    clt_diagnostics, ks_tolerance, sample_phase_distribution, SamplingMode,
};

fn main() -> orbit_sff::Result<()> {
    let samples: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100_000);
    let spec = SystemSpec::ring(2, 0.0);
    println!(
        "{:>3} {:>6} {:>9} {:>9} {:>9} {:>8}",
        "T", "mode", "var", "skew", "exkurt", "KS"
    );
    for (i, t) in [4u32, 8, 16, 32, 64].into_iter().enumerate() {
        let s = ShiftVector::new(&[0, 1], t);
        let set = sample_phase_distribution(&spec, t, &s, samples, i as u64, SamplingMode::Auto)?;
        let r = clt_diagnostics(&set.phi_tilde())?;
        println!(
            "{t:>3} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>8.4}",
            format!("{:?}", set.mode).to_lowercase(),
            r.variance,
            r.skewness,
            r.excess_kurtosis,
            r.ks_distance
        );
    }
    // sigma^2 of the two-site ring is 4, so var(Phi / sqrt T) -> 4
    eprintln!(
        "KS noise floor at n = {samples}: {:.4}",
        ks_tolerance(samples as usize)
    );
    Ok(())
}
