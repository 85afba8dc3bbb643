use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::states::{Provenance, StateMatrix};
use crate::error::{Error, Result};
use crate::noise::{compile_noise, specs_from_mask, CompiledNoise, NoiseKind, NoiseSpec};
use crate::qsim::{DensityMatrix, GateSpec};
use crate::rng;

/// Circuit topology, input scaling, noise list and seed of one reservoir instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnrConfig {
    pub n_qubits: usize,
    #[serde(default = "default_scaling")]
    pub input_scaling: f64,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_scaling() -> f64 {
    PI
}

impl Default for QnrConfig {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            input_scaling: PI,
            noise: Vec::new(),
            seed: 0,
        }
    }
}

impl QnrConfig {
    pub fn new(n_qubits: usize, noise: Vec<NoiseSpec>, seed: u64) -> Self {
        Self {
            n_qubits,
            input_scaling: PI,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::NoQubits);
        }
        if self.n_qubits % 2 == 1 {
            return Err(Error::OddQubits(self.n_qubits));
        }
        if self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::TooManyQubits(self.n_qubits));
        }
        if !self.input_scaling.is_finite() {
            return Err(Error::InvalidParameter("input scaling must be finite".into()));
        }
        for spec in &self.noise {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledNoise> {
        self.validate()?;
        compile_noise(&self.noise, self.n_qubits, self.seed)
    }
}

fn pair_gates(n_qubits: usize, angle: f64) -> Vec<GateSpec> {
    let mut gates = Vec::with_capacity(5 * n_qubits / 2);
    for i in (0..n_qubits).step_by(2) {
        gates.extend([
            GateSpec::Rx { target: i, angle },
            GateSpec::Rx { target: i + 1, angle },
            GateSpec::Cnot { control: i, target: i + 1 },
            GateSpec::Rz { target: i + 1, angle },
            GateSpec::Cnot { control: i, target: i + 1 },
        ]);
    }
    gates
}

/// Ideal input circuit for one step, in application order: on every pair `(i, i+1)`,
/// `RX_i(su)`, `RX_{i+1}(su)`, `CX`, `RZ_{i+1}(su)`, `CX`.
pub fn build_input_unitary(config: &QnrConfig, u: f64) -> Result<Vec<GateSpec>> {
    config.validate()?;
    Ok(pair_gates(config.n_qubits, config.input_scaling * u))
}

/// Initial condition of a run.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// `|+><+|` on every qubit.
    Plus,
    /// Product of the given single-qubit states, qubit 0 first.
    Product(Vec<DensityMatrix>),
}

fn check_inputs(inputs: &[f64]) -> Result<()> {
    if let Some(t) = inputs.iter().position(|u| !u.is_finite()) {
        return Err(Error::NonFinite { row: t, col: 0 });
    }
    Ok(())
}

/// Evolves the reservoir from `|+>^n` and records `<Z_i>` after every input.
pub fn run_qnr(config: &QnrConfig, inputs: &[f64]) -> Result<StateMatrix> {
    run_qnr_from(config, &InitialState::Plus, inputs)
}

pub fn run_qnr_from(config: &QnrConfig, initial: &InitialState, inputs: &[f64]) -> Result<StateMatrix> {
    let compiled = config.compile()?;
    run_compiled(config, &compiled, initial, inputs)
}

/// Same as [`run_qnr_from`] with an already compiled noise plan.
pub fn run_compiled(
    config: &QnrConfig,
    compiled: &CompiledNoise,
    initial: &InitialState,
    inputs: &[f64],
) -> Result<StateMatrix> {
    config.validate()?;
    check_inputs(inputs)?;
    let n = config.n_qubits;
    if compiled.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: compiled.n_qubits(),
        });
    }
    let factors = match initial {
        InitialState::Plus => vec![DensityMatrix::plus_state(1)?; n],
        InitialState::Product(states) => {
            if states.len() != n || states.iter().any(|s| s.n_qubits() != 1) {
                return Err(Error::InvalidParameter(format!(
                    "initial product state needs {n} single-qubit factors"
                )));
            }
            states.clone()
        }
    };
    let rows = if compiled.couples_blocks() {
        evolve_dense(config, compiled, &factors, inputs)?
    } else {
        evolve_blocks(config, compiled, &factors, inputs)?
    };
    let data = DMatrix::from_row_iterator(inputs.len(), n, rows.into_iter().flatten());
    StateMatrix::new(data, Provenance::Simulated)
}

/// Forces the full-register engine even when the state factorizes into blocks.
pub fn run_dense(config: &QnrConfig, initial: &InitialState, inputs: &[f64]) -> Result<StateMatrix> {
    let compiled = config.compile()?;
    config.validate()?;
    check_inputs(inputs)?;
    let factors = match initial {
        InitialState::Plus => vec![DensityMatrix::plus_state(1)?; config.n_qubits],
        InitialState::Product(s) => s.clone(),
    };
    let rows = evolve_dense(config, &compiled, &factors, inputs)?;
    let data = DMatrix::from_row_iterator(inputs.len(), config.n_qubits, rows.into_iter().flatten());
    StateMatrix::new(data, Provenance::Simulated)
}

fn evolve_dense(
    config: &QnrConfig,
    compiled: &CompiledNoise,
    factors: &[DensityMatrix],
    inputs: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut rho = DensityMatrix::tensor(factors)?;
    let mut rows = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let gates = compiled.circuit(&pair_gates(config.n_qubits, config.input_scaling * u));
        rho.apply_gates_in_place(&gates)?;
        for ch in compiled.channels() {
            for &q in &ch.targets {
                rho.kraus_unchecked(&ch.kraus, &[q]);
            }
        }
        rows.push(rho.expect_z_all());
    }
    Ok(rows)
}

// Without entanglers every gate and channel acts inside one pair (2b, 2b+1), so the
// register stays a product of 2-qubit blocks and each block evolves on its own.
fn evolve_blocks(
    config: &QnrConfig,
    compiled: &CompiledNoise,
    factors: &[DensityMatrix],
    inputs: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = config.n_qubits;
    let mut blocks = (0..n / 2)
        .map(|b| DensityMatrix::tensor(&factors[2 * b..2 * b + 2]))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let gates = compiled.circuit(&pair_gates(n, config.input_scaling * u));
        let mut row = Vec::with_capacity(n);
        for (b, rho) in blocks.iter_mut().enumerate() {
            let lo = 2 * b;
            let local: Vec<GateSpec> = gates
                .iter()
                .filter(|g| g.target() / 2 == b)
                .map(|g| g.shifted(lo))
                .collect();
            rho.apply_gates_in_place(&local)?;
            for ch in compiled.channels() {
                for &q in ch.targets.iter().filter(|&&q| q / 2 == b) {
                    rho.kraus_unchecked(&ch.kraus, &[q - lo]);
                }
            }
            row.extend(rho.expect_z_all());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The first `count` instance masks that contain amplitude damping, ascending.
pub fn default_masks(count: usize) -> Vec<u16> {
    let ad = NoiseKind::AmplitudeDamping.bit();
    (0u16..1024).filter(|m| m & ad != 0).take(count).collect()
}

/// Reservoir instance `index` of a sweep: noise kinds from `mask` at `rate`, seed derived
/// from `(master, index)`.
pub fn instance_config(base: &QnrConfig, mask: u16, rate: f64, master: u64, index: u64) -> QnrConfig {
    QnrConfig {
        n_qubits: base.n_qubits,
        input_scaling: base.input_scaling,
        noise: specs_from_mask(mask, rate),
        seed: rng::instance_seed(master, index),
    }
}
