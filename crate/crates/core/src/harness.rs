//! Experiment configuration, execution, manifests and reports.
//!
//! One experiment writes one directory: `config.toml` (the resolved config),
//! one or more CSV files whose first line is `# schema=<name>`, and
//! `manifest.json` with sha256 digests of everything else.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::SystemSpec;
use crate::ergodic::sub_seed;
use crate::error::{Error, Result};
use crate::orbits::{
    enumerate_periodic_points, group_into_orbits, sum_rule_check, trace_minus_two,
    write_orbit_inventory, ShiftVector,
};
use crate::potts::{
    bound_validation, closed_form_sff, landmarks, sff_transfer_sweep, thouless_time, PottsParams,
    SffPoint, SffPrediction, PREDICTION_SCHEMA,
};
use crate::quantum::{compare_points, sff_numeric, CircuitSpec, SERIES_SCHEMA};
use crate::semiclassics::{
    clt_diagnostics, full_variance_table, ks_tolerance, per_bond_variance_table,
    sample_phase_distribution, SamplingMode, TableKind, VarianceEstimator, VarianceTable,
};

pub const ORBIT_COUNTS_SCHEMA: &str = "orbit-sff/orbit-counts/v1";
pub const ORBIT_INVENTORY_SCHEMA: &str = "orbit-sff/orbit-inventory/v1";
pub const PHASE_SAMPLES_SCHEMA: &str = "orbit-sff/phase-samples/v1";
pub const CLT_SCHEMA: &str = "orbit-sff/clt/v1";
pub const VARIANCE_SCHEMA: &str = "orbit-sff/variance-table/v1";
pub const COMPARE_SCHEMA: &str = "orbit-sff/compare/v1";
pub const BOUND_SCHEMA: &str = "orbit-sff/bound/v1";

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Predict,
    Orbits,
    Clt,
    Variance,
    QuantumSff,
    Compare,
    BoundCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Predict => "predict",
            ExperimentKind::Orbits => "orbits",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Variance => "variance",
            ExperimentKind::QuantumSff => "quantum-sff",
            ExperimentKind::Compare => "compare",
            ExperimentKind::BoundCheck => "bound-check",
        }
    }
}

/// Potts parameters as written in a config: give either `chi` or `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PottsSection {
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(default = "one")]
    pub t_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub sigma2_phi: f64,
}

fn one() -> f64 {
    1.0
}

impl PottsSection {
    pub fn params(&self) -> Result<PottsParams> {
        let lambda = match (self.chi, self.lambda) {
            (Some(chi), None) => {
                if !(0.0..=1.0).contains(&chi) {
                    return Err(field("potts.chi", format!("must lie in [0, 1], got {chi}")));
                }
                if self.sigma2_phi == 0.0 {
                    return Err(field(
                        "potts.sigma2_phi",
                        "must be positive when chi is given",
                    ));
                }
                -2.0 * chi.ln() / self.sigma2_phi
            }
            (None, Some(l)) => l,
            _ => return Err(field("potts", "give exactly one of `chi` and `lambda`")),
        };
        let p = PottsParams {
            l: self.l,
            t_h: self.t_h,
            lambda,
            sigma2_phi: self.sigma2_phi,
        };
        p.validate().map_err(|e| field("potts", e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    #[serde(default = "one_u32")]
    pub t_min: u32,
    pub t_max: u32,
    #[serde(default = "one_u32")]
    pub t_step: u32,
    /// Also emit the chi = 1 and chi = 0 curves.
    #[serde(default = "yes")]
    pub limit_branches: bool,
    /// Also evaluate the transfer-matrix path on the Potts table.
    #[serde(default)]
    pub transfer: bool,
}

fn one_u32() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsSection {
    pub periods: Vec<u32>,
    #[serde(default = "yes")]
    pub inventory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub periods: Vec<u32>,
    /// Site shift `s`, reduced mod each period.
    pub shift: Vec<i64>,
    pub samples: u64,
    #[serde(default = "auto_mode")]
    pub mode: SamplingMode,
    #[serde(default = "yes")]
    pub write_samples: bool,
}

fn auto_mode() -> SamplingMode {
    SamplingMode::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSection {
    pub period: u32,
    pub estimator: VarianceEstimator,
    #[serde(default = "per_bond")]
    pub table: TableKind,
}

fn per_bond() -> TableKind {
    TableKind::PerBond
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    pub t_max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesSource {
    Quantum,
    /// Uses the prediction itself as the series (pipeline self-check).
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub t_max: u32,
    /// Effective per-bond variance used for the prediction.
    pub sigma2_phi: f64,
    #[serde(default = "quantum_source")]
    pub source: SeriesSource,
    /// Allowed relative deviation of the mean ratio from 1.
    #[serde(default = "quarter")]
    pub ratio_tolerance: f64,
}

fn quantum_source() -> SeriesSource {
    SeriesSource::Quantum
}

fn quarter() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFamily {
    pub eta: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    #[serde(default = "two_u32")]
    pub t_min: u32,
    pub t_max: u32,
    #[serde(default = "default_families")]
    pub families: Vec<DecayFamily>,
}

fn two_u32() -> u32 {
    2
}

pub fn default_families() -> Vec<DecayFamily> {
    vec![
        DecayFamily {
            eta: 0.5,
            theta: 1.0,
        },
        DecayFamily {
            eta: 0.3,
            theta: 0.5,
        },
        DecayFamily {
            eta: 0.8,
            theta: 2.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; the machine's parallelism when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potts: Option<PottsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSection>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn field(name: &str, reason: impl Into<String>) -> Error {
    Error::ConfigField {
        field: name.into(),
        reason: reason.into(),
    }
}

fn need<'a, T>(s: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| {
        field(
            name,
            format!("section required for kind `{}`", kind.as_str()),
        )
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        if self.workers == Some(0) {
            return Err(field("workers", "must be positive"));
        }
        let system = |s: &SystemSpec| s.validate().map_err(|e| field("system", e.to_string()));
        let circuit = |c: &CircuitSpec| c.validate().map_err(|e| field("circuit", e.to_string()));
        match k {
            ExperimentKind::Predict => {
                need(&self.potts, "potts", k)?.params()?;
                let p = need(&self.predict, "predict", k)?;
                if p.t_min == 0 || p.t_step == 0 || p.t_max < p.t_min {
                    return Err(field("predict", "need 1 <= t_min <= t_max and t_step >= 1"));
                }
            }
            ExperimentKind::Orbits => {
                system(need(&self.system, "system", k)?)?;
                if need(&self.orbits, "orbits", k)?.periods.contains(&0) {
                    return Err(field("orbits.periods", "periods must be positive"));
                }
            }
            ExperimentKind::Clt => {
                let s = need(&self.system, "system", k)?;
                system(s)?;
                let c = need(&self.clt, "clt", k)?;
                if c.shift.len() != s.l {
                    return Err(field("clt.shift", format!("needs {} components", s.l)));
                }
                if c.periods.contains(&0) || c.samples == 0 {
                    return Err(field("clt", "periods and samples must be positive"));
                }
            }
            ExperimentKind::Variance => {
                system(need(&self.system, "system", k)?)?;
                if need(&self.variance, "variance", k)?.period == 0 {
                    return Err(field("variance.period", "must be positive"));
                }
            }
            ExperimentKind::QuantumSff => {
                circuit(need(&self.circuit, "circuit", k)?)?;
                if need(&self.quantum, "quantum", k)?.t_max == 0 {
                    return Err(field("quantum.t_max", "must be positive"));
                }
            }
            ExperimentKind::Compare => {
                circuit(need(&self.circuit, "circuit", k)?)?;
                let c = need(&self.compare, "compare", k)?;
                if c.t_max == 0 || !(c.sigma2_phi >= 0.0) || !(c.ratio_tolerance > 0.0) {
                    return Err(field(
                        "compare",
                        "need t_max >= 1, sigma2_phi >= 0, ratio_tolerance > 0",
                    ));
                }
            }
            ExperimentKind::BoundCheck => {
                let p = need(&self.potts, "potts", k)?.params()?;
                if p.l < 2 {
                    return Err(field("potts.L", "bound check needs L >= 2"));
                }
                let b = need(&self.bound, "bound", k)?;
                if b.t_min < 2 || b.t_max < b.t_min {
                    return Err(field("bound", "need 2 <= t_min <= t_max"));
                }
                if b.families.is_empty() {
                    return Err(field("bound.families", "at least one family"));
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSeed {
    pub task: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub version: String,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub workers: usize,
    pub seeds: Vec<TaskSeed>,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files written by one run; removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    seeds: Vec<TaskSeed>,
}

impl Outputs {
    fn create(&mut self, name: &str, schema: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        let mut w = BufWriter::new(f);
        writeln!(w, "# schema={schema}").map_err(|e| Error::io(&path, e))?;
        Ok(w)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        serde_json::to_writer_pretty(BufWriter::new(f), value)?;
        Ok(())
    }

    fn seed(&mut self, task: impl Into<String>, seed: u64) -> u64 {
        self.seeds.push(TaskSeed {
            task: task.into(),
            seed,
        });
        seed
    }

    fn cleanup(&self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(f));
        }
    }
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}

/// Writes prediction rows without the leading schema comment of
/// [`SffPrediction::write_csv`], for files opened by [`Outputs::create`].
fn write_prediction<W: Write>(w: W, pred: &SffPrediction) -> Result<()> {
    let mut buf = Vec::new();
    pred.write_csv(&mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    let body = text.split_once('\n').map(|x| x.1).unwrap_or("");
    let mut w = w;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io("<prediction>", e))
}

/// Runs the experiment described by `cfg` and returns its manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads();
    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
        seeds: Vec::new(),
    };
    let start = Instant::now();
    let result = pool.install(|| execute(cfg, &mut out));
    if let Err(e) = result {
        out.cleanup();
        return Err(e);
    }
    let snapshot = dir.join(CONFIG_SNAPSHOT);
    fs::write(&snapshot, cfg.to_toml()?).map_err(|e| Error::io(&snapshot, e))?;
    out.files.push(CONFIG_SNAPSHOT.into());
    let outputs = out
        .files
        .iter()
        .map(|f| {
            Ok(OutputDigest {
                file: f.clone(),
                sha256: sha256_file(&dir.join(f))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        kind: cfg.kind,
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        workers,
        seeds: out.seeds,
        outputs,
    };
    let path = dir.join(MANIFEST);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    Ok(manifest)
}

fn execute(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Predict => run_predict(cfg, out),
        ExperimentKind::Orbits => run_orbits(cfg, out),
        ExperimentKind::Clt => run_clt(cfg, out),
        ExperimentKind::Variance => run_variance(cfg, out),
        ExperimentKind::QuantumSff => run_quantum(cfg, out),
        ExperimentKind::Compare => run_compare(cfg, out),
        ExperimentKind::BoundCheck => run_bound(cfg, out),
    }
}

fn time_grid(p: &PredictSection) -> Vec<f64> {
    (p.t_min..=p.t_max)
        .step_by(p.t_step as usize)
        .map(|t| t as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredictSummary {
    landmarks: crate::potts::Landmarks,
    thouless_time: Option<f64>,
    chi: f64,
}

fn run_predict(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let params = cfg.potts.as_ref().expect("validated").params()?;
    let sec = cfg.predict.as_ref().expect("validated");
    let times = time_grid(sec);
    let pred = closed_form_sff(&params, &times)?;
    write_prediction(out.create("prediction.csv", PREDICTION_SCHEMA)?, &pred)?;
    if sec.limit_branches {
        for (name, chi) in [("limit_chi1.csv", 1.0), ("limit_chi0.csv", 0.0)] {
            let p = PottsParams::from_chi(params.l, params.t_h, chi)?;
            write_prediction(
                out.create(name, PREDICTION_SCHEMA)?,
                &closed_form_sff(&p, &times)?,
            )?;
        }
    }
    if sec.transfer {
        let ts: Vec<u32> = times.iter().map(|&t| t as u32).collect();
        let tr = sff_transfer_sweep(&params, &ts, |t| {
            Ok(VarianceTable::potts(t, params.sigma2_phi))
        })?;
        write_prediction(
            out.create("prediction_transfer.csv", PREDICTION_SCHEMA)?,
            &tr,
        )?;
    }
    out.json(
        "landmarks.json",
        &PredictSummary {
            landmarks: landmarks(&pred.points),
            thouless_time: thouless_time(&params).ok(),
            chi: params.chi(),
        },
    )
}

fn run_orbits(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let spec = cfg.system.as_ref().expect("validated");
    let sec = cfg.orbits.as_ref().expect("validated");
    let mut counts = csv::Writer::from_writer(out.create("orbit_counts.csv", ORBIT_COUNTS_SCHEMA)?);
    counts.write_record(["T", "points", "abs_trace_minus_two", "orbits", "sum_rule"])?;
    for &t in &sec.periods {
        let pts = enumerate_periodic_points(t, &spec.map)?;
        let orbits = group_into_orbits(&pts, t, &spec.map)?;
        counts.write_record([
            t.to_string(),
            pts.len().to_string(),
            trace_minus_two(&spec.map, t)?.abs().to_string(),
            orbits.len().to_string(),
            sum_rule_check(t, &spec.map)?.to_string(),
        ])?;
        if sec.inventory {
            let mut w = csv::Writer::from_writer(
                out.create(&format!("orbits_T{t}.csv"), ORBIT_INVENTORY_SCHEMA)?,
            );
            w.write_record(["T", "num_q", "num_p", "den", "primitive_period"])?;
            write_orbit_inventory(&mut w, &orbits)?;
            finish(w)?;
        }
    }
    finish(counts)
}

fn run_clt(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let spec = cfg.system.as_ref().expect("validated");
    let sec = cfg.clt.as_ref().expect("validated");
    let mut summary = csv::Writer::from_writer(out.create("clt.csv", CLT_SCHEMA)?);
    summary.write_record([
        "T",
        "mode",
        "count",
        "variance",
        "skewness",
        "excess_kurtosis",
        "ks_distance",
        "degenerate",
    ])?;
    for (i, &t) in sec.periods.iter().enumerate() {
        let seed = out.seed(format!("clt/T{t}"), sub_seed(cfg.seed, i as u64));
        let s = ShiftVector::new(&sec.shift, t);
        let set = sample_phase_distribution(spec, t, &s, sec.samples, seed, sec.mode)?;
        let mode = match set.mode {
            SamplingMode::Exact => "exact",
            SamplingMode::Proxy => "proxy",
            SamplingMode::Auto => "auto",
        };
        if sec.write_samples {
            let mut w = csv::Writer::from_writer(
                out.create(&format!("phase_samples_T{t}.csv"), PHASE_SAMPLES_SCHEMA)?,
            );
            w.write_record(["family", "r", "s", "phi_tilde", "mode"])?;
            let join = |v: &[u32]| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(":")
            };
            for smp in &set.samples {
                w.write_record([
                    format!("{:016x}", smp.family),
                    join(&smp.r),
                    join(&smp.s),
                    smp.phi_tilde.to_string(),
                    mode.to_string(),
                ])?;
            }
            finish(w)?;
        }
        let rep = clt_diagnostics(&set.phi_tilde())?;
        summary.write_record([
            t.to_string(),
            mode.to_string(),
            rep.count.to_string(),
            rep.variance.to_string(),
            rep.skewness.to_string(),
            rep.excess_kurtosis.to_string(),
            rep.ks_distance.to_string(),
            rep.degenerate.to_string(),
        ])?;
    }
    finish(summary)
}

fn run_variance(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let spec = cfg.system.as_ref().expect("validated");
    let sec = cfg.variance.as_ref().expect("validated");
    let seed = out.seed("variance", sub_seed(cfg.seed, 0));
    let table = match sec.table {
        TableKind::PerBond => per_bond_variance_table(spec, sec.period, sec.estimator, seed)?,
        TableKind::FullShift => full_variance_table(spec, sec.period, sec.estimator, seed)?,
    };
    let w = out.create("variance_table.csv", VARIANCE_SCHEMA)?;
    table.write_csv(w)
}

fn run_quantum(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let mut spec = cfg.circuit.clone().expect("validated");
    let sec = cfg.quantum.as_ref().expect("validated");
    spec.ensemble.seed = out.seed("quantum/ensemble", sub_seed(cfg.seed, 0));
    let series = sff_numeric(&spec, sec.t_max)?;
    write_series(out.create("quantum_series.csv", SERIES_SCHEMA)?, &series)
}

fn write_series<W: Write>(w: W, series: &crate::quantum::SffSeries) -> Result<()> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    let body = text.split_once('\n').map(|x| x.1).unwrap_or("");
    let mut w = w;
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io("<series>", e))
}

fn compare_prediction(circuit: &CircuitSpec, sec: &CompareSection) -> Result<SffPrediction> {
    let params = PottsParams {
        l: circuit.l as u32,
        t_h: circuit.heisenberg_time(),
        lambda: circuit.lambda(),
        sigma2_phi: sec.sigma2_phi,
    };
    let times: Vec<f64> = (1..=sec.t_max).map(|t| t as f64).collect();
    closed_form_sff(&params, &times)
}

fn run_compare(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let mut circuit = cfg.circuit.clone().expect("validated");
    let sec = cfg.compare.as_ref().expect("validated");
    circuit.ensemble.seed = out.seed("compare/ensemble", sub_seed(cfg.seed, 0));
    let pred = compare_prediction(&circuit, sec)?;
    let (points, err) = match sec.source {
        SeriesSource::Quantum => {
            let s = sff_numeric(&circuit, sec.t_max)?;
            write_series(out.create("series.csv", SERIES_SCHEMA)?, &s)?;
            (s.points(), s.err)
        }
        SeriesSource::Prediction => {
            let s = crate::quantum::SffSeries {
                times: (1..=sec.t_max).collect(),
                k: pred.values(),
                err: vec![0.0; sec.t_max as usize],
                meta: crate::quantum::SeriesMeta {
                    n: circuit.n,
                    l: circuit.l,
                    epsilon: circuit.epsilon(),
                    lambda: circuit.lambda(),
                    members: 0,
                    window_min: 0,
                    window_frac: 0.0,
                    seed: 0,
                    method: "prediction".into(),
                },
            };
            write_series(out.create("series.csv", SERIES_SCHEMA)?, &s)?;
            (s.points(), s.err)
        }
    };
    write_prediction(out.create("prediction.csv", PREDICTION_SCHEMA)?, &pred)?;
    let rep = compare_points(&points, &err, &pred)?;
    let mut w = csv::Writer::from_writer(out.create("compare.csv", COMPARE_SCHEMA)?);
    w.write_record(["t", "K_series", "err", "K_prediction", "ratio", "deviation"])?;
    for r in &rep.rows {
        w.write_record([
            r.t.to_string(),
            r.k_series.to_string(),
            r.err.to_string(),
            r.k_prediction.to_string(),
            r.ratio.to_string(),
            r.deviation.to_string(),
        ])?;
    }
    finish(w)?;
    out.json("compare.json", &CompareSummary::from(&rep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub mean_ratio: f64,
    pub ratio_std_error: f64,
    pub max_abs_deviation: f64,
    pub reduced_chi2: Option<f64>,
    pub series_landmarks: crate::potts::Landmarks,
    pub prediction_landmarks: crate::potts::Landmarks,
}

impl From<&crate::quantum::CompareReport> for CompareSummary {
    fn from(r: &crate::quantum::CompareReport) -> Self {
        CompareSummary {
            mean_ratio: r.mean_ratio,
            ratio_std_error: r.ratio_std_error,
            max_abs_deviation: r.max_abs_deviation,
            reduced_chi2: r.reduced_chi2,
            series_landmarks: r.series_landmarks,
            prediction_landmarks: r.prediction_landmarks,
        }
    }
}

fn run_bound(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let params = cfg.potts.as_ref().expect("validated").params()?;
    let sec = cfg.bound.as_ref().expect("validated");
    let times: Vec<u32> = (sec.t_min..=sec.t_max).collect();
    let mut w = csv::Writer::from_writer(out.create("bound.csv", BOUND_SCHEMA)?);
    w.write_record([
        "eta",
        "theta",
        "T",
        "K",
        "K0",
        "deviation",
        "bound",
        "holds",
    ])?;
    for fam in &sec.families {
        let res = bound_validation(&params, fam.eta, fam.theta, &times)?;
        for r in &res.rows {
            w.write_record([
                fam.eta.to_string(),
                fam.theta.to_string(),
                r.t.to_string(),
                r.k.to_string(),
                r.k0.to_string(),
                r.deviation.to_string(),
                r.bound.to_string(),
                r.holds().to_string(),
            ])?;
        }
    }
    finish(w)
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub directory: PathBuf,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "run {} ({})\n",
            self.directory.display(),
            self.kind.as_str()
        );
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        s.push_str(if self.all_passed() {
            "all checks passed\n"
        } else {
            "some checks failed\n"
        });
        s
    }
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

/// A CSV written by this crate, read back with its schema and header checked.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    path: PathBuf,
}

impl Table {
    pub fn read(path: &Path, schema: &str, header: &[&str]) -> Result<Table> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let mut first = String::new();
        r.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        let found = first
            .trim()
            .strip_prefix("# schema=")
            .and_then(|s| s.split_whitespace().next());
        if found != Some(schema) {
            return Err(Error::Schema {
                file: path.into(),
                field: "schema".into(),
            });
        }
        let mut c = csv::Reader::from_reader(r);
        let got: Vec<String> = c.headers()?.iter().map(String::from).collect();
        for (i, h) in header.iter().enumerate() {
            if got.get(i).map(String::as_str) != Some(*h) {
                return Err(Error::Schema {
                    file: path.into(),
                    field: h.to_string(),
                });
            }
        }
        let rows = c
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table {
            header: got,
            rows,
            path: path.into(),
        })
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let schema = || Error::Schema {
            file: self.path.clone(),
            field: name.into(),
        };
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(schema)?;
        self.rows
            .iter()
            .map(|r| {
                r.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(schema)
            })
            .collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<String>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                file: self.path.clone(),
                field: name.into(),
            })?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

const PREDICTION_HEADER: [&str; 8] = ["T", "tau", "K", "mode", "L", "chi", "Lambda", "sigma2_phi"];
const SERIES_HEADER: [&str; 8] = ["t", "tau", "K", "err", "N", "L", "epsilon", "Lambda"];

fn read_points(
    dir: &Path,
    file: &str,
    schema: &str,
    header: &[&str],
    t: &str,
) -> Result<(Vec<SffPoint>, Vec<f64>)> {
    let tb = Table::read(&dir.join(file), schema, header)?;
    let ts = tb.column_f64(t)?;
    let tau = tb.column_f64("tau")?;
    let k = tb.column_f64("K")?;
    let err = if header.contains(&"err") {
        tb.column_f64("err")?
    } else {
        vec![0.0; ts.len()]
    };
    Ok((
        ts.iter()
            .zip(&tau)
            .zip(&k)
            .map(|((&t, &tau), &k)| SffPoint { t, tau, k })
            .collect(),
        err,
    ))
}

/// Re-reads a run directory, verifies digests and schemas, and evaluates the
/// kind-specific checks.
pub fn report(dir: &Path) -> Result<RunReport> {
    let mpath = dir.join(MANIFEST);
    let f = File::open(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: RunManifest = serde_json::from_reader(BufReader::new(f))?;
    let mut checks = Vec::new();

    let mut bad = Vec::new();
    for o in &manifest.outputs {
        match sha256_file(&dir.join(&o.file)) {
            Ok(d) if d == o.sha256 => {}
            _ => bad.push(o.file.clone()),
        }
    }
    checks.push(check(
        "manifest-digests",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} files verified", manifest.outputs.len())
        } else {
            format!("mismatch: {}", bad.join(", "))
        },
    ));

    let cfg = &manifest.config;
    match manifest.kind {
        ExperimentKind::Predict => {
            let (pts, _) = read_points(
                dir,
                "prediction.csv",
                PREDICTION_SCHEMA,
                &PREDICTION_HEADER,
                "T",
            )?;
            let lm = landmarks(&pts);
            checks.push(check(
                "single-bump",
                lm.maxima == 1,
                format!("{} interior maxima, bump at T = {:?}", lm.maxima, lm.bump_t),
            ));
            if let Some(last) = pts.last() {
                let d = (last.k / last.t - 1.0).abs();
                checks.push(check(
                    "ramp-end",
                    d < 1e-6,
                    format!("|K/T - 1| = {d:.3e} at T = {}", last.t),
                ));
            }
            let l = cfg.potts.as_ref().map(|p| p.l).unwrap_or(1) as i32;
            if dir.join("limit_chi1.csv").exists() {
                let (p1, _) = read_points(
                    dir,
                    "limit_chi1.csv",
                    PREDICTION_SCHEMA,
                    &PREDICTION_HEADER,
                    "T",
                )?;
                let (p0, _) = read_points(
                    dir,
                    "limit_chi0.csv",
                    PREDICTION_SCHEMA,
                    &PREDICTION_HEADER,
                    "T",
                )?;
                let ok1 = p1.iter().all(|p| p.k == p.t.powi(l));
                let ok0 = p0.iter().all(|p| p.k == p.t);
                checks.push(check("limit-chi1", ok1, "K = T^L on every grid point"));
                checks.push(check("limit-chi0", ok0, "K = T on every grid point"));
            }
        }
        ExperimentKind::Orbits => {
            let tb = Table::read(
                &dir.join("orbit_counts.csv"),
                ORBIT_COUNTS_SCHEMA,
                &["T", "points", "abs_trace_minus_two", "orbits", "sum_rule"],
            )?;
            let pts = tb.column_f64("points")?;
            let tr = tb.column_f64("abs_trace_minus_two")?;
            let sr = tb.column_f64("sum_rule")?;
            checks.push(check(
                "count-oracle",
                pts.iter().zip(&tr).all(|(a, b)| a == b),
                "point counts equal |tr M^T - 2|",
            ));
            let worst = sr.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            checks.push(check(
                "sum-rule",
                worst <= 1e-12,
                format!("max |sum A^2 - 1| = {worst:.2e}"),
            ));
        }
        ExperimentKind::Clt => {
            let tb = Table::read(
                &dir.join("clt.csv"),
                CLT_SCHEMA,
                &[
                    "T",
                    "mode",
                    "count",
                    "variance",
                    "skewness",
                    "excess_kurtosis",
                    "ks_distance",
                    "degenerate",
                ],
            )?;
            let ks = tb.column_f64("ks_distance")?;
            let n = tb.column_f64("count")?;
            let trend = ks
                .windows(2)
                .zip(n.windows(2))
                .all(|(k, c)| k[1] <= k[0] + ks_tolerance(c[0].min(c[1]) as usize));
            checks.push(check("ks-trend", trend, format!("KS distances {ks:?}")));
        }
        ExperimentKind::Variance => {
            let tb = Table::read(
                &dir.join("variance_table.csv"),
                VARIANCE_SCHEMA,
                &["key", "sigma2", "std_error"],
            )?;
            let s = tb.column_f64("sigma2")?;
            let e = tb.column_f64("std_error")?;
            let keys = tb.column("key")?;
            let zero_ok = keys
                .iter()
                .zip(&s)
                .filter(|(k, _)| k.split(':').all(|c| c == "0"))
                .all(|(_, &v)| v == 0.0);
            checks.push(check(
                "zero-shift",
                zero_ok,
                "sigma^2 vanishes on the synchronous class",
            ));
            let nonneg = s.iter().zip(&e).all(|(v, e)| *v >= -3.0 * e);
            checks.push(check("nonnegative", nonneg, "sigma^2 >= -3 std_error"));
        }
        ExperimentKind::QuantumSff => {
            let (pts, err) = read_points(
                dir,
                "quantum_series.csv",
                SERIES_SCHEMA,
                &SERIES_HEADER,
                "t",
            )?;
            let ok = pts.iter().all(|p| p.k >= 0.0) && err.iter().all(|e| *e >= 0.0);
            checks.push(check("nonnegative", ok, format!("{} times", pts.len())));
        }
        ExperimentKind::Compare => {
            let sec = cfg
                .compare
                .as_ref()
                .ok_or_else(|| field("compare", "missing in manifest"))?;
            let (sp, err) = read_points(dir, "series.csv", SERIES_SCHEMA, &SERIES_HEADER, "t")?;
            let (pp, _) = read_points(
                dir,
                "prediction.csv",
                PREDICTION_SCHEMA,
                &PREDICTION_HEADER,
                "T",
            )?;
            let params = PottsParams {
                l: cfg.circuit.as_ref().map(|c| c.l as u32).unwrap_or(1),
                t_h: 1.0,
                lambda: 0.0,
                sigma2_phi: sec.sigma2_phi,
            };
            let pred = SffPrediction {
                mode: crate::potts::PredictionMode::ClosedForm,
                params,
                points: pp,
            };
            let rep = compare_points(&sp, &err, &pred)?;
            let tol = sec.ratio_tolerance;
            checks.push(check(
                "mean-ratio",
                (rep.mean_ratio - 1.0).abs() <= tol,
                format!(
                    "mean K/K_pred = {:.4} +- {:.4} (tolerance {tol})",
                    rep.mean_ratio, rep.ratio_std_error
                ),
            ));
            let worst = rep
                .rows
                .iter()
                .map(|r| (r.ratio - 1.0).abs())
                .fold(0.0, f64::max);
            checks.push(check(
                "max-ratio-deviation",
                worst <= tol,
                format!("max |K/K_pred - 1| = {worst:.4}"),
            ));
            checks.push(check(
                "landmarks",
                rep.series_landmarks.maxima == rep.prediction_landmarks.maxima,
                format!(
                    "interior maxima: series {}, prediction {}",
                    rep.series_landmarks.maxima, rep.prediction_landmarks.maxima
                ),
            ));
        }
        ExperimentKind::BoundCheck => {
            let tb = Table::read(
                &dir.join("bound.csv"),
                BOUND_SCHEMA,
                &[
                    "eta",
                    "theta",
                    "T",
                    "K",
                    "K0",
                    "deviation",
                    "bound",
                    "holds",
                ],
            )?;
            let dev = tb.column_f64("deviation")?;
            let bound = tb.column_f64("bound")?;
            let k = tb.column_f64("K")?;
            let holds = dev.iter().zip(&bound).all(|(d, b)| d <= b);
            checks.push(check("bound-holds", holds, format!("{} rows", dev.len())));
            let eta = tb.column("eta")?;
            let theta = tb.column("theta")?;
            let mut decay = true;
            for i in 0..dev.len() {
                let last = i + 1 == dev.len() || eta[i + 1] != eta[i] || theta[i + 1] != theta[i];
                if last && dev[i] / k[i] > 1e-3 {
                    decay = false;
                }
            }
            checks.push(check(
                "relative-deviation-decay",
                decay,
                "|K - K0| / K < 1e-3 at the last T",
            ));
        }
    }
    Ok(RunReport {
        kind: manifest.kind,
        directory: dir.into(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "predict"
seed = 1
[potts]
L = 3
chi = 0.975
[predict]
t_max = 100
"#;

    #[test]
    fn minimal_predict_loads() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.kind, ExperimentKind::Predict);
        let p = c.predict.as_ref().unwrap();
        assert_eq!((p.t_min, p.t_step, p.limit_branches), (1, 1, true));
        assert_eq!(c.output, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_named() {
        let bad = MINIMAL.replace("seed = 1", "seed = 1\nbogus_key = 3");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::ConfigParse(m)) => assert!(m.contains("bogus_key"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_seed_rejected() {
        let bad = MINIMAL.replace("seed = 1\n", "");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn missing_section_named() {
        let bad = MINIMAL.replace("[predict]\nt_max = 100\n", "");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::ConfigField { field, .. }) => assert_eq!(field, "predict"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn potts_section_needs_one_coupling() {
        let s = PottsSection {
            l: 2,
            t_h: 1.0,
            chi: Some(0.5),
            lambda: Some(1.0),
            sigma2_phi: 1.0,
        };
        assert!(s.params().is_err());
        let ok = PottsSection { lambda: None, ..s };
        assert!((ok.params().unwrap().chi() - 0.5).abs() < 1e-15);
    }
}
