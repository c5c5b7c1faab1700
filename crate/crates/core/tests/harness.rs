use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use orbit_sff::harness::{load_config, report, run_experiment, ExperimentConfig, ExperimentKind};
use orbit_sff::Error;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn config(name: &str, out: &Path) -> ExperimentConfig {
    let mut c = load_config(&config_dir().join(name)).unwrap();
    c.output = out.to_path_buf();
    c
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn example_configs_round_trip() {
    let mut n = 0;
    for e in fs::read_dir(config_dir()).unwrap() {
        let p = e.unwrap().path();
        let c = load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again, "{}", p.display());
        n += 1;
    }
    assert_eq!(n, 7);
}

#[test]
fn unknown_key_rejected_with_name() {
    let text = fs::read_to_string(config_dir().join("clt.toml")).unwrap();
    let bad = text.replace("samples = 100000", "samples = 100000\nsampels = 5");
    let err = ExperimentConfig::from_toml(&bad).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("sampels"), "{err}");
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = config("clt.toml", &tmp.path().join("a"));
    a.clt.as_mut().unwrap().samples = 5000;
    a.clt.as_mut().unwrap().write_samples = true;
    a.workers = Some(1);
    let mut b = a.clone();
    b.output = tmp.path().join("b");
    b.workers = Some(4);
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    let (fa, fb) = (csv_files(&a.output), csv_files(&b.output));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
}

#[test]
fn manifest_digests_detect_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("predict.toml", tmp.path());
    let m = run_experiment(&c).unwrap();
    assert_eq!(m.kind, ExperimentKind::Predict);
    let r = report(tmp.path()).unwrap();
    assert!(r.all_passed(), "{}", r.to_text());

    let p = tmp.path().join("limit_chi0.csv");
    let text = fs::read_to_string(&p)
        .unwrap()
        .replacen("\n1,1,1,", "\n1,1,1.5,", 1);
    fs::write(&p, text).unwrap();
    let r = report(tmp.path()).unwrap();
    let failed: Vec<_> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(failed, ["manifest-digests", "limit-chi0"]);
}

#[test]
fn self_comparison_passes_and_corruption_fails_named_check() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("compare.toml", tmp.path());
    run_experiment(&c).unwrap();
    let r = report(tmp.path()).unwrap();
    assert!(r.all_passed(), "{}", r.to_text());

    // double K in the series body
    let p = tmp.path().join("series.csv");
    let text = fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    let mut out = format!("{}\n{}\n", lines.next().unwrap(), lines.next().unwrap());
    for l in lines {
        let mut f: Vec<String> = l.split(',').map(String::from).collect();
        f[2] = (f[2].parse::<f64>().unwrap() * 2.0).to_string();
        out.push_str(&f.join(","));
        out.push('\n');
    }
    fs::write(&p, out).unwrap();
    let r = report(tmp.path()).unwrap();
    let failed: Vec<_> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.contains(&"mean-ratio"), "{failed:?}");
    assert!(failed.contains(&"manifest-digests"));
}

#[test]
fn schema_mismatch_names_file_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config("bound_check.toml", tmp.path());
    let mut c = c;
    c.bound.as_mut().unwrap().t_max = 20;
    run_experiment(&c).unwrap();
    let p = tmp.path().join("bound.csv");
    let text = fs::read_to_string(&p)
        .unwrap()
        .replacen("deviation", "dev", 1);
    fs::write(&p, text).unwrap();
    match report(tmp.path()) {
        Err(Error::Schema { file, field }) => {
            assert!(file.ends_with("bound.csv"));
            assert_eq!(field, "deviation");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn failed_run_cleans_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config("orbits.toml", tmp.path());
    // the period-60 lattice overflows 128-bit arithmetic
    c.orbits.as_mut().unwrap().periods = vec![2, 3, 60];
    let err = run_experiment(&c).unwrap_err();
    assert!(matches!(err, Error::Overflow { .. }), "{err}");
    assert!(!err.is_validation());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

fn cli(args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_orbit-sff"))
        .args(args)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
    )
}

#[test]
fn cli_exit_codes_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_dir().join("predict.toml");
    let out = tmp.path().join("run");
    let (code, _) = cli(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code, 0);
    let snap = load_config(&out.join("config.toml")).unwrap();
    assert_eq!((snap.seed, snap.output.clone()), (99, out.clone()));
    let (code, text) = cli(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("all checks passed"));

    // wrong kind for the config
    let (code, _) = cli(&[
        "orbits",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    // unparseable config
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "kind = \"predict\"\nseed = \"x\"\n").unwrap();
    assert_eq!(cli(&["predict", "--config", bad.to_str().unwrap()]).0, 2);
    // runtime failure
    let ovf = tmp.path().join("ovf.toml");
    let text = fs::read_to_string(config_dir().join("orbits.toml"))
        .unwrap()
        .replace("periods = [1, 2, 3, 4, 5, 6, 8, 10, 12]", "periods = [60]");
    fs::write(&ovf, text).unwrap();
    let o2 = tmp.path().join("ovf");
    assert_eq!(
        cli(&[
            "orbits",
            "--config",
            ovf.to_str().unwrap(),
            "--output",
            o2.to_str().unwrap()
        ])
        .0,
        3
    );
    // missing run directory
    assert_eq!(
        cli(&["report", tmp.path().join("nope").to_str().unwrap()]).0,
        3
    );
}

#[test]
fn uncoupled_compare_follows_fixed_point_counts_not_t_squared() {
    use orbit_sff::quantum::fixed_points_mod_n;
    use orbit_sff::torus::CatMapSpec;
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
kind = "compare"
seed = 1
[circuit]
L = 2
N = 16
coupling = { kind = "epsilon", value = 0.0 }
[circuit.ensemble]
members = 1
window_min = 0
fixed_offsets = true
[compare]
t_max = 48
sigma2_phi = 2.0
"#;
    let mut c = ExperimentConfig::from_toml(text).unwrap();
    c.output = tmp.path().to_path_buf();
    run_experiment(&c).unwrap();
    let series = orbit_sff::harness::Table::read(
        &tmp.path().join("series.csv"),
        orbit_sff::quantum::SERIES_SCHEMA,
        &["t", "tau", "K"],
    )
    .unwrap();
    let k = series.column_f64("K").unwrap();
    for (i, k) in k.iter().enumerate() {
        let f = fixed_points_mod_n(&CatMapSpec::ARNOLD, i as u32 + 1, 16) as f64;
        assert!(
            (k - f * f).abs() < 1e-6 * f * f,
            "t = {}: {k} vs {}",
            i + 1,
            f * f
        );
    }
    // the chi = 1 prediction is t^2; the arithmetic series is far from it
    let r = report(tmp.path()).unwrap();
    let failed: Vec<_> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.contains(&"mean-ratio"), "{}", r.to_text());
}
