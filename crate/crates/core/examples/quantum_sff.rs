//! Ensemble SFF of two coupled quantum cat maps next to the Potts prediction.
//!
//!     cargo run --release --example quantum_sff [N] [members] [per-step chi]

use orbit_sff::potts::{closed_form_sff, PottsParams};
use orbit_sff::quantum::{compare, ramp_slope, sff_numeric, CircuitSpec, Coupling, EnsembleSpec};

fn main() -> orbit_sff::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(16);
    let members: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let chi_step: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.9);

    let t_h = (n * n) as f64;
    let sigma2_phi = 2.0; // effective per-bond value of the two-site ring
    let lambda = -2.0 * t_h * chi_step.ln() / sigma2_phi;
    let ens = EnsembleSpec {
        members,
        window_min: 5,
        window_frac: 0.1,
        seed: 1,
        fixed_offsets: false,
    };
    let spec = CircuitSpec::new(2, n, Coupling::Lambda(lambda), ens);
    let t_max = (0.75 * t_h) as u32;

    let series = sff_numeric(&spec, t_max)?;
    let params = PottsParams {
        l: 2,
        t_h,
        lambda,
        sigma2_phi,
    };
    let times: Vec<f64> = series.times.iter().map(|&t| t as f64).collect();
    let pred = closed_form_sff(&params, &times)?;

    println!("t,K,err,K_pred");
    for (i, p) in pred.points.iter().enumerate() {
        println!(
            "{},{},{},{}",
            series.times[i], series.k[i], series.err[i], p.k
        );
    }
    let rep = compare(&series, &pred)?;
    let lo = t_max as f64 / 3.0;
    eprintln!(
        "N = {n}, eps = {:.3e}: mean K/K_pred = {:.3}, late slope {:.3} (prediction {:.3})",
        spec.epsilon(),
        rep.mean_ratio,
        ramp_slope(&series.points(), lo, t_max as f64).unwrap_or(f64::NAN),
        ramp_slope(&pred.points, lo, t_max as f64).unwrap_or(f64::NAN)
    );
    Ok(())
}
