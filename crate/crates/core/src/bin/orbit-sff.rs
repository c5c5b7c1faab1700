use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orbit_sff::harness::{load_config, report, run_experiment, ExperimentKind};
use orbit_sff::Error;

#[derive(Parser)]
#[command(
    name = "orbit-sff",
    version,
    about = "Spectral form factor experiments for coupled cat maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Predict(RunArgs),
    Orbits(RunArgs),
    Clt(RunArgs),
    Variance(RunArgs),
    QuantumSff(RunArgs),
    Compare(RunArgs),
    BoundCheck(RunArgs),
    /// Verify a finished run directory and print its checks.
    Report {
        dir: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    if cfg.kind != kind {
        return Err(Error::ConfigField {
            field: "kind".into(),
            reason: format!(
                "config is `{}`, command is `{}`",
                cfg.kind.as_str(),
                kind.as_str()
            ),
        });
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.output {
        cfg.output = o;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    let m = run_experiment(&cfg)?;
    println!(
        "{} finished in {:.2} s, {} files in {}",
        kind.as_str(),
        m.wall_time_s,
        m.outputs.len() + 1,
        cfg.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Predict(a) => run(ExperimentKind::Predict, a),
        Command::Orbits(a) => run(ExperimentKind::Orbits, a),
        Command::Clt(a) => run(ExperimentKind::Clt, a),
        Command::Variance(a) => run(ExperimentKind::Variance, a),
        Command::QuantumSff(a) => run(ExperimentKind::QuantumSff, a),
        Command::Compare(a) => run(ExperimentKind::Compare, a),
        Command::BoundCheck(a) => run(ExperimentKind::BoundCheck, a),
        Command::Report { dir, json } => report(&dir).and_then(|r| {
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", r.to_text());
            }
            let failed: Vec<String> = r
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.clone())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::ChecksFailed(failed))
            }
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
