//! Subcommand implementations. Each writes its artifacts under `out` together with a
//! manifest that names the config hash and the SHA-256 of every file.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use qnr_core::noise::NoiseKind;
use qnr_core::reservoir::{
    esp_probe, fit_readout, narma2, nrmse, run_esn, run_qnr, spatial_multiplex, uniform_inputs,
    FitDiagnostics, Provenance, QnrConfig, Split, StateMatrix,
};
use qnr_core::noise::NoiseSpec;
use qnr_core::rng::{self, Purpose};
use qnr_core::tipc::{analyze, ipc_of_target, per_feature, InputRange, TipcReport, TipcSettings};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Instance, Reservoir, Task};
use crate::io::{format_value, read_series, read_states, write_series, write_states, write_table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<u16>,
    pub noise: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub instances: Vec<InstanceRecord>,
    pub artifacts: Vec<Artifact>,
}

/// Collects artifact paths relative to the output directory.
struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_owned(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> PathBuf {
        self.files.push(PathBuf::from(rel));
        self.root.join(rel)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn finish(self, command: &str, cfg_hash: &str, seed: u64, instances: Vec<InstanceRecord>) -> Result<Manifest> {
        let mut artifacts = Vec::new();
        for rel in &self.files {
            let bytes = std::fs::read(self.root.join(rel))?;
            artifacts.push(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            command: command.into(),
            version: VERSION.into(),
            config_hash: cfg_hash.into(),
            seed,
            instances,
            artifacts,
        };
        let path = self.root.join(format!("manifest_{command}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

/// Inputs, target and declared input range of the configured task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub inputs: Vec<f64>,
    pub target: Vec<f64>,
    pub range: Option<InputRange>,
}

pub fn task_data(cfg: &ExperimentConfig) -> Result<TaskData> {
    let len = cfg.split.total();
    match &cfg.task {
        Task::Narma2 { input_lo, input_hi } => {
            let inputs = uniform_inputs(len, *input_lo, *input_hi, &mut rng::stream(cfg.seed, 0, Purpose::Inputs));
            let target = narma2(&inputs);
            Ok(TaskData {
                inputs,
                target,
                range: Some(InputRange {
                    lo: *input_lo,
                    hi: *input_hi,
                }),
            })
        }
        Task::CsvTarget { inputs, target } => {
            let u = read_series(inputs)?;
            let y = read_series(target)?;
            ensure!(
                u.len() == y.len(),
                "inputs ({}) and target ({}) differ in length",
                u.len(),
                y.len()
            );
            ensure!(
                u.len() >= len,
                "split needs {len} steps, CSV task has {}",
                u.len()
            );
            Ok(TaskData {
                inputs: u[..len].to_vec(),
                target: y[..len].to_vec(),
                range: None,
            })
        }
    }
}

fn records(instances: &[Instance]) -> Vec<InstanceRecord> {
    instances
        .iter()
        .enumerate()
        .map(|(index, inst)| match inst {
            Instance::Qnr { mask, config } => InstanceRecord {
                index,
                model: "qnr".into(),
                mask: *mask,
                noise: config.noise.iter().map(|s| s.kind.label().to_string()).collect(),
                seed: config.seed,
            },
            Instance::Esn(c) => InstanceRecord {
                index,
                model: "esn".into(),
                mask: None,
                noise: Vec::new(),
                seed: c.seed,
            },
        })
        .collect()
}

/// Runs every instance on `inputs` in parallel, preserving sweep order.
pub fn simulate_states(instances: &[Instance], inputs: &[f64]) -> Result<Vec<StateMatrix>> {
    instances
        .par_iter()
        .map(|inst| match inst {
            Instance::Qnr { config, .. } => run_qnr(config, inputs),
            Instance::Esn(c) => run_esn(c, inputs),
        })
        .collect::<qnr_core::Result<Vec<_>>>()
        .map_err(Into::into)
}

/// `states/instance_XXXX.csv` per instance plus `inputs.csv` and `target.csv`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let data = task_data(cfg)?;
    let instances = cfg.instances();
    let states = simulate_states(&instances, &data.inputs)?;
    let mut o = Outputs::new(out)?;
    write_series(&o.path("inputs.csv"), &data.inputs)?;
    write_series(&o.path("target.csv"), &data.target)?;
    for (i, x) in states.iter().enumerate() {
        write_states(&o.path(&format!("states/instance_{i:04}.csv")), x)?;
    }
    o.finish("simulate", &hash, cfg.seed, records(&instances))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub train_nrmse: f64,
    pub eval_nrmse: f64,
    pub weights: Vec<f64>,
    pub bias: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub config_hash: String,
    pub model: String,
    pub split: Split,
    pub train_range: [usize; 2],
    pub eval_range: [usize; 2],
    pub n_features: usize,
    /// Mean over runs (one run for a multiplexed QNR).
    pub train_nrmse: f64,
    pub eval_nrmse: f64,
    /// Population standard deviation of the eval NRMSE over runs.
    pub eval_nrmse_std: f64,
    pub runs: Vec<RunMetrics>,
}

fn fit_and_score(x: &StateMatrix, y: &[f64], split: &Split, bias: bool, seed: u64) -> Result<RunMetrics> {
    let r = fit_readout(x, y, split.train_range(), bias)?;
    let yhat = r.predict(x)?;
    Ok(RunMetrics {
        seed,
        train_nrmse: nrmse(y, &yhat, split.train_range())?,
        eval_nrmse: nrmse(y, &yhat, split.eval_range())?,
        weights: r.weights,
        bias: r.bias,
        diagnostics: r.diagnostics,
    })
}

/// Trains the linear readout and reports NRMSE; QNR instances are multiplexed into one
/// reservoir, ESN configurations are trained separately and averaged.
pub fn train_metrics(cfg: &ExperimentConfig) -> Result<TrainMetrics> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let data = task_data(cfg)?;
    let instances = cfg.instances();
    let states = simulate_states(&instances, &data.inputs)?;
    let split = cfg.split;
    let (model, n_features, runs) = match &cfg.reservoir {
        Reservoir::Qnr(_) => {
            let x = spatial_multiplex(&states)?;
            let run = fit_and_score(&x, &data.target, &split, cfg.readout_bias, cfg.seed)?;
            ("qnr", x.n_features(), vec![run])
        }
        Reservoir::Esn(e) => {
            let runs = states
                .iter()
                .zip(&instances)
                .map(|(x, inst)| {
                    let seed = match inst {
                        Instance::Esn(c) => c.seed,
                        Instance::Qnr { config, .. } => config.seed,
                    };
                    fit_and_score(x, &data.target, &split, cfg.readout_bias, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            ("esn", e.n_nodes, runs)
        }
    };
    let n = runs.len() as f64;
    let train = runs.iter().map(|r| r.train_nrmse).sum::<f64>() / n;
    let eval = runs.iter().map(|r| r.eval_nrmse).sum::<f64>() / n;
    let std = (runs.iter().map(|r| (r.eval_nrmse - eval).powi(2)).sum::<f64>() / n).sqrt();
    Ok(TrainMetrics {
        config_hash: hash,
        model: model.into(),
        split,
        train_range: [split.train_range().start, split.train_range().end],
        eval_range: [split.eval_range().start, split.eval_range().end],
        n_features,
        train_nrmse: train,
        eval_nrmse: eval,
        eval_nrmse_std: std,
        runs,
    })
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainMetrics> {
    let metrics = train_metrics(cfg)?;
    let mut o = Outputs::new(out)?;
    o.json("metrics.json", &metrics)?;
    o.finish("train", &metrics.config_hash, cfg.seed, records(&cfg.instances()))?;
    Ok(metrics)
}

/// Settings with the input range taken from the task when it declares one.
fn settings_for(cfg: &ExperimentConfig, data: &TaskData) -> TipcSettings {
    let mut s = cfg.tipc.clone();
    if let Some(r) = data.range {
        s.input_range = r;
    }
    s
}

fn window(x: &StateMatrix, range: std::ops::Range<usize>) -> Result<StateMatrix> {
    let rows: Vec<Vec<f64>> = range.map(|t| x.row(t)).collect();
    Ok(StateMatrix::from_rows(&rows, x.provenance())?)
}

fn degree_rows(report: &TipcReport) -> Vec<Vec<String>> {
    report
        .profile
        .per_degree
        .iter()
        .map(|d| vec![d.degree.to_string(), format_value(d.tiv), format_value(d.tv)])
        .collect()
}

fn feature_rows(reports: &[TipcReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                format!("x{}", k + 1),
                r.profile.rank.to_string(),
                format_value(r.profile.tiv_total),
                format_value(r.profile.tv_total),
                format_value(r.profile.total),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileArtifact {
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceRecord>,
    pub rows: [usize; 2],
    pub report: TipcReport,
}

/// TIPC of every instance over the training window of the split.
pub fn tipc(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<TipcReport>> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let data = task_data(cfg)?;
    let settings = settings_for(cfg, &data);
    let instances = cfg.instances();
    let recs = records(&instances);
    let states = simulate_states(&instances, &data.inputs)?;
    let rows = cfg.split.train_range();
    let u = &data.inputs[rows.clone()];
    let analysed = states
        .par_iter()
        .map(|x| -> Result<(TipcReport, Vec<TipcReport>)> {
            let xw = window(x, rows.clone())?;
            let whole = analyze(&xw, u, &settings)?;
            let parts = if cfg.analysis.per_feature {
                per_feature(&xw, u, &settings)?
            } else {
                Vec::new()
            };
            Ok((whole, parts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut o = Outputs::new(out)?;
    let mut summary = Vec::new();
    for (i, (report, parts)) in analysed.iter().enumerate() {
        o.json(
            &format!("tipc/profile_{i:04}.json"),
            &ProfileArtifact {
                config_hash: hash.clone(),
                instance: Some(recs[i].clone()),
                rows: [rows.start, rows.end],
                report: report.clone(),
            },
        )?;
        write_table(&o.path(&format!("tipc/degrees_{i:04}.csv")), &["degree", "tiv", "tv"], &degree_rows(report))?;
        if !parts.is_empty() {
            write_table(
                &o.path(&format!("tipc/features_{i:04}.csv")),
                &["feature", "rank", "tiv_total", "tv_total", "total"],
                &feature_rows(parts),
            )?;
        }
        let p = &report.profile;
        summary.push(vec![
            i.to_string(),
            recs[i].mask.map_or(String::new(), |m| m.to_string()),
            recs[i].noise.join("+"),
            p.rank.to_string(),
            format_value(p.tiv_total),
            format_value(p.tv_total),
            format_value(p.total),
            format_value(p.tiv_fraction()),
            p.threshold.value().map_or(String::new(), format_value),
        ]);
    }
    write_table(
        &o.path("tipc_summary.csv"),
        &["instance", "mask", "noise", "rank", "tiv_total", "tv_total", "total", "tiv_fraction", "threshold"],
        &summary,
    )?;
    o.finish("tipc", &hash, cfg.seed, recs)?;
    Ok(analysed.into_iter().map(|(r, _)| r).collect())
}

/// Task-requirement profile: input-only capacities of the target over the training window.
pub fn ipc(cfg: &ExperimentConfig, out: &Path) -> Result<TipcReport> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let data = task_data(cfg)?;
    let settings = settings_for(cfg, &data);
    let rows = cfg.split.train_range();
    let report = ipc_of_target(&data.target[rows.clone()], &data.inputs[rows.clone()], &settings)?;
    let mut o = Outputs::new(out)?;
    o.json(
        "ipc_profile.json",
        &ProfileArtifact {
            config_hash: hash.clone(),
            instance: None,
            rows: [rows.start, rows.end],
            report: report.clone(),
        },
    )?;
    write_table(&o.path("ipc_degrees.csv"), &["degree", "tiv", "tv"], &degree_rows(&report))?;
    let mut terms: Vec<_> = report.records.iter().collect();
    terms.sort_by(|a, b| b.capacity.total_cmp(&a.capacity));
    let term_rows: Vec<Vec<String>> = terms
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.term.degree().to_string(),
                format_value(r.capacity),
                r.truncated.to_string(),
            ]
        })
        .collect();
    write_table(&o.path("ipc_terms.csv"), &["term", "degree", "capacity", "truncated"], &term_rows)?;
    o.finish("ipc", &hash, cfg.seed, Vec::new())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspRate {
    pub config_hash: String,
    pub n_qubits: usize,
    pub gamma: f64,
    pub trials: usize,
    pub steps: usize,
    /// Fitted per-step slope of `ln distance`.
    pub slope: Option<f64>,
    /// `ln(1 - gamma) / 2`, the slope of the contraction bound.
    pub bound_slope: f64,
    pub fit_len: usize,
    pub final_distance: f64,
}

/// Convergence of trajectories from random product states under amplitude damping.
pub fn esp(cfg: &ExperimentConfig, out: &Path) -> Result<EspRate> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let e = &cfg.esp;
    let inputs = uniform_inputs(e.steps, 0.0, 1.0, &mut rng::stream(cfg.seed, 0, Purpose::Inputs));
    let qnr = QnrConfig::new(
        e.n_qubits,
        vec![NoiseSpec::new(NoiseKind::AmplitudeDamping, e.gamma)],
        cfg.seed,
    );
    let result = esp_probe(&qnr, &inputs, e.trials, cfg.seed)?;
    let mut o = Outputs::new(out)?;
    write_series(&o.path("esp_decay.csv"), &result.distance)?;
    let rate = EspRate {
        config_hash: hash.clone(),
        n_qubits: e.n_qubits,
        gamma: e.gamma,
        trials: e.trials,
        steps: e.steps,
        slope: result.slope,
        bound_slope: 0.5 * (1.0 - e.gamma).ln(),
        fit_len: result.fit_len,
        final_distance: *result.distance.last().unwrap_or(&0.0),
    };
    o.json("esp_rate.json", &rate)?;
    o.finish("esp", &hash, cfg.seed, Vec::new())?;
    Ok(rate)
}

/// Externally recorded reservoir trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceBundle {
    pub inputs: PathBuf,
    /// One or more state files with equal length; columns are concatenated in order.
    pub states: Vec<PathBuf>,
    #[serde(default)]
    pub metadata: TraceMetadata,
}

/// Device information, kept verbatim.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnot_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    pub version: String,
    pub n_steps: usize,
    pub n_features: usize,
    pub metadata: TraceMetadata,
    pub sources: Vec<Artifact>,
}

impl TraceBundle {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut b: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths are relative to the bundle file.
        let base = path.parent().unwrap_or(Path::new(""));
        b.inputs = base.join(&b.inputs);
        b.states = b.states.iter().map(|p| base.join(p)).collect();
        Ok(b)
    }

    /// Reads and validates every file: schema, finiteness and a common length.
    pub fn read(&self) -> Result<(Vec<f64>, StateMatrix)> {
        if self.states.is_empty() {
            bail!("trace bundle lists no state files");
        }
        let inputs = read_series(&self.inputs)?;
        let mut parts = Vec::new();
        for p in &self.states {
            let x = read_states(p)?;
            ensure!(
                x.n_steps() == inputs.len(),
                "{} has {} rows but {} has {}",
                p.display(),
                x.n_steps(),
                self.inputs.display(),
                inputs.len()
            );
            parts.push(x);
        }
        let states = spatial_multiplex(&parts)?;
        debug_assert_eq!(states.provenance(), Provenance::Ingested);
        Ok((inputs, states))
    }
}

fn sha_of(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Validates a trace bundle and stores it under `out/store`.
pub fn ingest(bundle: &TraceBundle, out: &Path) -> Result<StoreIndex> {
    let (inputs, states) = bundle.read()?;
    let mut sources = vec![Artifact {
        path: bundle.inputs.to_string_lossy().into_owned(),
        sha256: sha_of(&bundle.inputs)?,
    }];
    for p in &bundle.states {
        sources.push(Artifact {
            path: p.to_string_lossy().into_owned(),
            sha256: sha_of(p)?,
        });
    }
    let index = StoreIndex {
        version: VERSION.into(),
        n_steps: inputs.len(),
        n_features: states.n_features(),
        metadata: bundle.metadata.clone(),
        sources,
    };
    let mut o = Outputs::new(out)?;
    write_series(&o.path("store/inputs.csv"), &inputs)?;
    write_states(&o.path("store/states.csv"), &states)?;
    o.json("store/index.json", &index)?;
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&index)?));
    o.finish("ingest", &hash, 0, Vec::new())?;
    Ok(index)
}

/// Reads a store written by [`ingest`].
pub fn load_store(dir: &Path) -> Result<(Vec<f64>, StateMatrix, StoreIndex)> {
    let store = dir.join("store");
    let index: StoreIndex = serde_json::from_str(
        &std::fs::read_to_string(store.join("index.json")).with_context(|| format!("reading store in {}", dir.display()))?,
    )?;
    let inputs = read_series(&store.join("inputs.csv"))?;
    let states = read_states(&store.join("states.csv"))?;
    ensure!(
        inputs.len() == states.n_steps() && states.n_steps() == index.n_steps,
        "store in {} is inconsistent",
        dir.display()
    );
    Ok((inputs, states, index))
}

/// TIPC of an ingested trace over all rows, with per-feature attribution and the
/// device metadata paired against the time-invariant total.
pub fn tipc_ingested(store_dir: &Path, settings: &TipcSettings, out: &Path) -> Result<(TipcReport, Vec<TipcReport>)> {
    settings.validate()?;
    let (inputs, states, index) = load_store(store_dir)?;
    let report = analyze(&states, &inputs, settings)?;
    let parts = per_feature(&states, &inputs, settings)?;
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&(settings, &index))?));
    let mut o = Outputs::new(out)?;
    o.json(
        "profile.json",
        &ProfileArtifact {
            config_hash: hash.clone(),
            instance: None,
            rows: [0, inputs.len()],
            report: report.clone(),
        },
    )?;
    write_table(&o.path("degrees.csv"), &["degree", "tiv", "tv"], &degree_rows(&report))?;
    write_table(
        &o.path("features.csv"),
        &["feature", "rank", "tiv_total", "tv_total", "total"],
        &feature_rows(&parts),
    )?;
    let m = &index.metadata;
    let opt = |v: Option<f64>| v.map_or(String::new(), format_value);
    write_table(
        &o.path("device.csv"),
        &["device", "cnot_error", "readout_error", "tiv_total", "tv_total", "total"],
        &[vec![
            m.device.clone().unwrap_or_default(),
            opt(m.cnot_error),
            opt(m.readout_error),
            format_value(report.profile.tiv_total),
            format_value(report.profile.tv_total),
            format_value(report.profile.total),
        ]],
    )?;
    o.finish("tipc", &hash, 0, Vec::new())?;
    Ok((report, parts))
}
