//! K / T_H against tau = t / T_H for several N at fixed Lambda.

use orbit_sff::quantum::{lambda_sweep, rescaled_at, CircuitSpec, Coupling, EnsembleSpec};

fn main() -> orbit_sff::Result<()> {
    let lambda: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2.0);
    let ens = EnsembleSpec {
        members: 20,
        window_min: 5,
        window_frac: 0.1,
        seed: 3,
        fixed_offsets: false,
    };
    let template = CircuitSpec::new(2, 8, Coupling::Lambda(lambda), ens);
    let ns = [8usize, 12, 16, 20];
    let sweep = lambda_sweep(&template, lambda, &ns, 0.5)?;

    print!("{:>6}", "tau");
    for n in ns {
        print!(" {:>12}", format!("N={n}"));
    }
    println!();
    for i in 1..=10 {
        let tau = 0.05 * i as f64;
        print!("{tau:>6.2}");
        for s in &sweep {
            match rescaled_at(s, tau) {
                Some((k, _)) => print!(" {k:>12.4}"),
                None => print!(" {:>12}", "-"),
            }
        }
        println!();
    }
    Ok(())
}
