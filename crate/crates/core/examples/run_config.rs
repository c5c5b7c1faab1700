//! Runs an experiment config and prints its report.
//!
//!     cargo run --release --example run_config -- examples/configs/predict.toml /tmp/run

use std::path::PathBuf;

use orbit_sff::harness::{load_config, report, run_experiment};

fn main() -> orbit_sff::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/predict.toml").into()
    }));
    let mut cfg = load_config(&path)?;
    if let Some(out) = args.next() {
        cfg.output = out.into();
    }
    let m = run_experiment(&cfg)?;
    for o in &m.outputs {
        println!("{}  {}", &o.sha256[..12], o.file);
    }
    print!("{}", report(&cfg.output)?.to_text());
    Ok(())
}
