//! Bump-ramp curve of the Potts prediction with its two limiting branches.
//!
//!     cargo run --release --example bump_ramp_curve [chi] [L] [t_max] > curve.csv

use orbit_sff::potts::{closed_form_sff, landmarks, thouless_time, PottsParams};

fn main() -> orbit_sff::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let chi = arg(0, 0.975);
    let l = arg(1, 3.0) as u32;
    let t_max = arg(2, 1500.0) as u32;

    let times: Vec<f64> = (1..=t_max).map(|t| t as f64).collect();
    let curve = closed_form_sff(&PottsParams::from_chi(l, 1.0, chi)?, &times)?;
    let upper = closed_form_sff(&PottsParams::from_chi(l, 1.0, 1.0)?, &times)?;
    let lower = closed_form_sff(&PottsParams::from_chi(l, 1.0, 0.0)?, &times)?;

    println!("T,K,K_chi1,K_chi0");
    for ((c, u), w) in curve.points.iter().zip(&upper.points).zip(&lower.points) {
        println!("{},{},{},{}", c.t, c.k, u.k, w.k);
    }

    let lm = landmarks(&curve.points);
    let th = thouless_time(&curve.params)?;
    eprintln!(
        "chi = {chi}, L = {l}: {} interior maximum, bump at T = {:?} (K = {:.1}), Thouless time {th:.1}",
        lm.maxima,
        lm.bump_t,
        lm.bump_k.unwrap_or(f64::NAN)
    );
    let last = curve.points.last().unwrap();
    eprintln!("K/T at T = {}: {:.9}", last.t, last.k / last.t);
    Ok(())
}
