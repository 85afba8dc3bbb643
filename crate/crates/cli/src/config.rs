//! Experiment configuration file (TOML).
//!
//! Every section is `deny_unknown_fields`, so a misspelt key is a parse error rather
//! than a silently ignored setting.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qnr_core::reservoir::{default_masks, instance_config, EsnConfig, QnrConfig, Split};
use qnr_core::rng;
use qnr_core::tipc::TipcSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 9,998 / 20,000 / 20,000 split.
    Paper,
    /// 1,000 / 2,000 / 2,000 split.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub task: Task,
    pub reservoir: Reservoir,
    pub split: Split,
    #[serde(default = "yes")]
    pub readout_bias: bool,
    #[serde(default)]
    pub tipc: TipcSettings,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub esp: EspSettings,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// NARMA2 driven by i.i.d. uniform inputs on `[lo, hi)`.
    Narma2 { input_lo: f64, input_hi: f64 },
    /// Inputs and target read from `t,value` CSV files.
    CsvTarget { inputs: PathBuf, target: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reservoir {
    Qnr(QnrSweep),
    Esn(EsnSweep),
}

/// Which noise masks the instances of a sweep use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Masks {
    /// The first `multiplex` masks containing amplitude damping.
    Damped,
    /// All 1024 masks, `0..1024`; `multiplex` is ignored.
    All,
    /// One instance per listed mask.
    Explicit(Vec<u16>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnrSweep {
    #[serde(default = "four")]
    pub n_qubits: usize,
    #[serde(default = "pi")]
    pub input_scaling: f64,
    /// Rate of every enabled noise kind.
    #[serde(default = "tenth")]
    pub rate: f64,
    #[serde(default = "twenty_five")]
    pub multiplex: usize,
    #[serde(default = "damped")]
    pub masks: Masks,
    /// Explicit instances; when non-empty they replace the mask sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<QnrConfig>,
}

fn four() -> usize {
    4
}
fn pi() -> f64 {
    PI
}
fn tenth() -> f64 {
    0.1
}
fn twenty_five() -> usize {
    25
}
fn damped() -> Masks {
    Masks::Damped
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnSweep {
    pub n_nodes: usize,
    pub spectral_radius: f64,
    #[serde(default = "esn_iota")]
    pub input_scaling: f64,
    #[serde(default = "half")]
    pub internal_density: f64,
    #[serde(default = "tenth")]
    pub input_density: f64,
    /// Independent weight draws; metrics are averaged over them.
    #[serde(default = "ten")]
    pub configurations: usize,
}

fn esn_iota() -> f64 {
    0.1
}
fn half() -> f64 {
    0.5
}
fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    /// Also compute one profile per state column.
    #[serde(default)]
    pub per_feature: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EspSettings {
    pub n_qubits: usize,
    pub gamma: f64,
    pub trials: usize,
    pub steps: usize,
}

impl Default for EspSettings {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            gamma: 0.05,
            trials: 20,
            steps: 175,
        }
    }
}

/// One reservoir of a sweep with the mask that produced it (if any).
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Qnr { mask: Option<u16>, config: QnrConfig },
    Esn(EsnConfig),
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            seed: 42,
            output_dir: None,
            task: Task::Narma2 {
                input_lo: 0.0,
                input_hi: 1.0,
            },
            reservoir: Reservoir::Qnr(QnrSweep {
                n_qubits: 4,
                input_scaling: PI,
                rate: 0.1,
                multiplex: 25,
                masks: Masks::Damped,
                instances: Vec::new(),
            }),
            split: match preset {
                Preset::Paper => Split::PAPER,
                Preset::Desk => Split::DESK,
            },
            readout_bias: true,
            tipc: TipcSettings::default(),
            analysis: Analysis::default(),
            esp: EspSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing experiment config")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 {
            bail!("seed {} does not fit a TOML integer (max {})", self.seed, i64::MAX);
        }
        self.split.validate()?;
        self.tipc.validate()?;
        match &self.task {
            Task::Narma2 { input_lo, input_hi } => {
                if !(input_lo.is_finite() && input_hi.is_finite() && input_lo < input_hi) {
                    bail!("task input range [{input_lo}, {input_hi}) is empty or not finite");
                }
            }
            Task::CsvTarget { .. } => {}
        }
        match &self.reservoir {
            Reservoir::Qnr(q) => {
                if q.instances.is_empty() {
                    if let Masks::Damped = q.masks {
                        if q.multiplex == 0 {
                            bail!("multiplex must be at least 1");
                        }
                        if q.multiplex > 512 {
                            bail!("only 512 masks contain amplitude damping, asked for {}", q.multiplex);
                        }
                    }
                    if let Masks::Explicit(list) = &q.masks {
                        if list.is_empty() {
                            bail!("explicit mask list is empty");
                        }
                        if let Some(m) = list.iter().find(|&&m| m >= 1024) {
                            bail!("mask {m} has bits beyond the ten noise kinds");
                        }
                    }
                }
                for inst in self.instances() {
                    if let Instance::Qnr { config, .. } = inst {
                        config.validate()?;
                        config.compile()?;
                    }
                }
            }
            Reservoir::Esn(e) => {
                if e.configurations == 0 {
                    bail!("ESN needs at least one configuration");
                }
                for inst in self.instances() {
                    if let Instance::Esn(c) = inst {
                        c.validate()?;
                    }
                }
            }
        }
        if self.esp.trials < 2 || self.esp.steps == 0 {
            bail!("ESP probe needs at least two trials and one step");
        }
        if !(0.0..=1.0).contains(&self.esp.gamma) {
            bail!("ESP gamma {} outside [0, 1]", self.esp.gamma);
        }
        Ok(())
    }

    /// Reservoir instances in sweep order; seeds derive from `(seed, index)`.
    pub fn instances(&self) -> Vec<Instance> {
        match &self.reservoir {
            Reservoir::Qnr(q) => {
                if !q.instances.is_empty() {
                    return q
                        .instances
                        .iter()
                        .map(|c| Instance::Qnr {
                            mask: None,
                            config: c.clone(),
                        })
                        .collect();
                }
                let masks = match &q.masks {
                    Masks::Damped => default_masks(q.multiplex),
                    Masks::All => (0..1024).collect(),
                    Masks::Explicit(list) => list.clone(),
                };
                let base = QnrConfig {
                    n_qubits: q.n_qubits,
                    input_scaling: q.input_scaling,
                    ..QnrConfig::default()
                };
                masks
                    .into_iter()
                    .enumerate()
                    .map(|(i, m)| Instance::Qnr {
                        mask: Some(m),
                        config: instance_config(&base, m, q.rate, self.seed, i as u64),
                    })
                    .collect()
            }
            Reservoir::Esn(e) => (0..e.configurations)
                .map(|i| {
                    Instance::Esn(EsnConfig {
                        n_nodes: e.n_nodes,
                        spectral_radius: e.spectral_radius,
                        input_scaling: e.input_scaling,
                        internal_density: e.internal_density,
                        input_density: e.input_density,
                        seed: rng::instance_seed(self.seed, i as u64),
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for p in [Preset::Desk, Preset::Paper] {
            let c = ExperimentConfig::preset(p);
            c.validate().unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentConfig::preset(Preset::Desk).to_toml().unwrap();
        text = text.replace("rate = 0.1", "rte = 0.1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn seed_changes_hash_and_instances() {
        let a = ExperimentConfig::preset(Preset::Desk);
        let mut b = a.clone();
        b.seed = 43;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.instances(), b.instances());
        assert_eq!(a.instances().len(), 25);
    }
}
