//! Noise channels for the reservoir circuit.
//!
//! Decoherence and Pauli noise compile to single-qubit Kraus sets applied after the
//! circuit on every targeted qubit. Coherent noise modifies the circuit itself: angle
//! over-rotations, CNOT bias and unintended entanglers, each driven by per-qubit
//! strengths `eps_i = eps_max * s_i`, `s_i ~ U(0, 1)`, fixed for the lifetime of a
//! reservoir instance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::qsim::{pauli_x, pauli_y, pauli_z, GateSpec, Operator};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    AmplitudeDamping,
    PhaseDamping,
    Depolarizing,
    BitFlip,
    PhaseFlip,
    OverRotationRx,
    OverRotationRz,
    CnotBias,
    EntanglerOneHop,
    EntanglerTwoHop,
}

impl NoiseKind {
    /// All kinds in mask-bit order: bit `i` of an instance mask enables `ALL[i]`.
    pub const ALL: [NoiseKind; 10] = [
        NoiseKind::AmplitudeDamping,
        NoiseKind::PhaseDamping,
        NoiseKind::Depolarizing,
        NoiseKind::BitFlip,
        NoiseKind::PhaseFlip,
        NoiseKind::OverRotationRx,
        NoiseKind::OverRotationRz,
        NoiseKind::CnotBias,
        NoiseKind::EntanglerOneHop,
        NoiseKind::EntanglerTwoHop,
    ];

    pub fn bit(self) -> u16 {
        1 << (self as u16)
    }

    pub fn is_coherent(self) -> bool {
        matches!(
            self,
            NoiseKind::OverRotationRx
                | NoiseKind::OverRotationRz
                | NoiseKind::CnotBias
                | NoiseKind::EntanglerOneHop
                | NoiseKind::EntanglerTwoHop
        )
    }

    /// Short label used in tables (`ad`, `pd`, `d`, `b`, `pf`, `x`, `z`, `c`, `u1`, `u2`).
    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::AmplitudeDamping => "ad",
            NoiseKind::PhaseDamping => "pd",
            NoiseKind::Depolarizing => "d",
            NoiseKind::BitFlip => "b",
            NoiseKind::PhaseFlip => "pf",
            NoiseKind::OverRotationRx => "x",
            NoiseKind::OverRotationRz => "z",
            NoiseKind::CnotBias => "c",
            NoiseKind::EntanglerOneHop => "u1",
            NoiseKind::EntanglerTwoHop => "u2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    #[default]
    All,
    Qubits(Vec<usize>),
}

impl Targets {
    pub fn resolve(&self, n_qubits: usize) -> Result<Vec<usize>> {
        match self {
            Targets::All => Ok((0..n_qubits).collect()),
            Targets::Qubits(qs) => {
                let mut out = qs.clone();
                out.sort_unstable();
                out.dedup();
                if let Some(&bad) = out.iter().find(|&&q| q >= n_qubits) {
                    return Err(Error::QubitIndex {
                        index: bad,
                        n_qubits,
                    });
                }
                Ok(out)
            }
        }
    }
}

/// One noise channel: kind, rate (`p`, `gamma` or `eps_max`) and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    #[serde(default)]
    pub targets: Targets,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64) -> Self {
        Self {
            kind,
            rate,
            targets: Targets::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("noise rate", self.rate)
    }
}

/// Noise list of an instance mask, in kind order, every kind at `rate`.
pub fn specs_from_mask(mask: u16, rate: f64) -> Vec<NoiseSpec> {
    NoiseKind::ALL
        .iter()
        .filter(|k| mask & k.bit() != 0)
        .map(|&k| NoiseSpec::new(k, rate))
        .collect()
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn diag(a: f64, b: f64) -> Operator {
    Operator::from_row_slice(2, 2, &[real(a), real(0.0), real(0.0), real(b)])
}

/// `sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z`.
pub fn kraus_depolarizing(p: f64) -> Result<Vec<Operator>> {
    check_unit_interval("depolarizing p", p)?;
    let w = (p / 3.0).sqrt();
    Ok(vec![
        Operator::identity(2, 2).map(|z| z * (1.0 - p).sqrt()),
        pauli_x().map(|z| z * w),
        pauli_y().map(|z| z * w),
        pauli_z().map(|z| z * w),
    ])
}

pub fn kraus_bit_flip(p: f64) -> Result<Vec<Operator>> {
    check_unit_interval("bit-flip p", p)?;
    Ok(vec![
        Operator::identity(2, 2).map(|z| z * (1.0 - p).sqrt()),
        pauli_x().map(|z| z * p.sqrt()),
    ])
}

pub fn kraus_phase_flip(p: f64) -> Result<Vec<Operator>> {
    check_unit_interval("phase-flip p", p)?;
    Ok(vec![
        Operator::identity(2, 2).map(|z| z * (1.0 - p).sqrt()),
        pauli_z().map(|z| z * p.sqrt()),
    ])
}

/// `K0 = diag(1, sqrt(1-gamma))`, `K1 = sqrt(gamma) |0><1|`.
pub fn kraus_amplitude_damping(gamma: f64) -> Result<Vec<Operator>> {
    check_unit_interval("amplitude damping gamma", gamma)?;
    let k1 = Operator::from_row_slice(
        2,
        2,
        &[real(0.0), real(gamma.sqrt()), real(0.0), real(0.0)],
    );
    Ok(vec![diag(1.0, (1.0 - gamma).sqrt()), k1])
}

/// `K0 = diag(1, sqrt(1-gamma))`, `K1 = diag(0, sqrt(gamma))`.
pub fn kraus_phase_damping(gamma: f64) -> Result<Vec<Operator>> {
    check_unit_interval("phase damping gamma", gamma)?;
    Ok(vec![
        diag(1.0, (1.0 - gamma).sqrt()),
        diag(0.0, gamma.sqrt()),
    ])
}

/// Kraus set of a decoherence kind; `None` for coherent kinds.
pub fn kraus_for(kind: NoiseKind, rate: f64) -> Option<Result<Vec<Operator>>> {
    match kind {
        NoiseKind::AmplitudeDamping => Some(kraus_amplitude_damping(rate)),
        NoiseKind::PhaseDamping => Some(kraus_phase_damping(rate)),
        NoiseKind::Depolarizing => Some(kraus_depolarizing(rate)),
        NoiseKind::BitFlip => Some(kraus_bit_flip(rate)),
        NoiseKind::PhaseFlip => Some(kraus_phase_flip(rate)),
        _ => None,
    }
}

/// Per-qubit coherent-noise strengths `eps_max * U(0, 1)`.
pub fn sample_epsilons<R: Rng + ?Sized>(eps_max: f64, n_qubits: usize, rng: &mut R) -> Vec<f64> {
    (0..n_qubits)
        .map(|_| eps_max * rng.random::<f64>())
        .collect()
}

/// Scales RX (or RZ) angles on qubit `i` by `1 + eps_i`.
pub fn perturb_over_rotation(gates: &[GateSpec], kind: NoiseKind, epsilons: &[f64]) -> Vec<GateSpec> {
    gates
        .iter()
        .map(|g| match (*g, kind) {
            (GateSpec::Rx { target, angle }, NoiseKind::OverRotationRx) => GateSpec::Rx {
                target,
                angle: angle * (1.0 + epsilons[target]),
            },
            (GateSpec::Rz { target, angle }, NoiseKind::OverRotationRz) => GateSpec::Rz {
                target,
                angle: angle * (1.0 + epsilons[target]),
            },
            (g, _) => g,
        })
        .collect()
}

/// Replaces each CNOT whose target is biased by `CRX(pi (1 + eps_target))`.
pub fn perturb_cnot_bias(gates: &[GateSpec], epsilons: &[f64], biased: &[usize]) -> Vec<GateSpec> {
    gates
        .iter()
        .map(|g| match *g {
            GateSpec::Cnot { control, target } if biased.contains(&target) => GateSpec::Crx {
                control,
                target,
                angle: PI * (1.0 + epsilons[target]),
            },
            g => g,
        })
        .collect()
}

/// `CRX(pi eps_j)` between chain neighbours `(j, j + hop)` for every listed `j`.
pub fn entangler_gates(
    epsilons: &[f64],
    hop: usize,
    n_qubits: usize,
    sources: &[usize],
) -> Result<Vec<GateSpec>> {
    if !(1..=2).contains(&hop) {
        return Err(Error::InvalidParameter(format!(
            "entangler hop must be 1 or 2, got {hop}"
        )));
    }
    if n_qubits < hop + 1 {
        return Err(Error::TooFewQubitsForHop { hop, n_qubits });
    }
    Ok((0..n_qubits - hop)
        .filter(|j| sources.contains(j))
        .map(|j| GateSpec::Crx {
            control: j,
            target: j + hop,
            angle: PI * epsilons[j],
        })
        .collect())
}

/// A coherent perturbation with its frozen per-qubit strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kind: NoiseKind,
    pub epsilons: Vec<f64>,
    pub targets: Vec<usize>,
}

/// A decoherence channel applied to each target after the circuit.
#[derive(Debug, Clone)]
pub struct ChannelStep {
    pub kind: NoiseKind,
    pub kraus: Vec<Operator>,
    pub targets: Vec<usize>,
}

/// Per-step noise plan: circuit perturbations first, then channels in listed order.
#[derive(Debug, Clone)]
pub struct CompiledNoise {
    n_qubits: usize,
    perturbations: Vec<Perturbation>,
    channels: Vec<ChannelStep>,
}

impl CompiledNoise {
    pub fn ideal(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            perturbations: Vec::new(),
            channels: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn perturbations(&self) -> &[Perturbation] {
        &self.perturbations
    }

    pub fn channels(&self) -> &[ChannelStep] {
        &self.channels
    }

    pub fn epsilons(&self, kind: NoiseKind) -> Option<&[f64]> {
        self.perturbations
            .iter()
            .find(|p| p.kind == kind)
            .map(|p| p.epsilons.as_slice())
    }

    /// True when some gate couples qubits across the 2-qubit blocks of the ansatz.
    pub fn couples_blocks(&self) -> bool {
        self.perturbations.iter().any(|p| {
            matches!(
                p.kind,
                NoiseKind::EntanglerOneHop | NoiseKind::EntanglerTwoHop
            )
        })
    }

    /// The noisy circuit for one step: perturbed ideal gates followed by entanglers.
    pub fn circuit(&self, ideal: &[GateSpec]) -> Vec<GateSpec> {
        let mut gates = ideal.to_vec();
        let mut tail = Vec::new();
        for p in &self.perturbations {
            match p.kind {
                NoiseKind::OverRotationRx | NoiseKind::OverRotationRz => {
                    let mut eps = vec![0.0; self.n_qubits];
                    for &q in &p.targets {
                        eps[q] = p.epsilons[q];
                    }
                    gates = perturb_over_rotation(&gates, p.kind, &eps);
                }
                NoiseKind::CnotBias => {
                    gates = perturb_cnot_bias(&gates, &p.epsilons, &p.targets);
                }
                NoiseKind::EntanglerOneHop | NoiseKind::EntanglerTwoHop => {
                    let hop = if p.kind == NoiseKind::EntanglerOneHop { 1 } else { 2 };
                    tail.extend(
                        entangler_gates(&p.epsilons, hop, self.n_qubits, &p.targets)
                            .expect("hop validated at compile time"),
                    );
                }
                _ => unreachable!("decoherence kinds are channels"),
            }
        }
        gates.extend(tail);
        gates
    }
}

/// Compiles a noise list for an `n_qubits` register. Epsilons of coherent kinds are drawn
/// from per-kind streams of `seed`, so the plan is a pure function of its arguments.
pub fn compile_noise(specs: &[NoiseSpec], n_qubits: usize, seed: u64) -> Result<CompiledNoise> {
    let mut compiled = CompiledNoise::ideal(n_qubits);
    let mut seen = Vec::new();
    for spec in specs {
        spec.validate()?;
        if seen.contains(&spec.kind) {
            return Err(Error::DuplicateNoise(spec.kind));
        }
        seen.push(spec.kind);
        let targets = spec.targets.resolve(n_qubits)?;
        if let Some(kraus) = kraus_for(spec.kind, spec.rate) {
            compiled.channels.push(ChannelStep {
                kind: spec.kind,
                kraus: kraus?,
                targets,
            });
        } else {
            match spec.kind {
                NoiseKind::EntanglerOneHop if n_qubits < 2 => {
                    return Err(Error::TooFewQubitsForHop { hop: 1, n_qubits })
                }
                NoiseKind::EntanglerTwoHop if n_qubits < 3 => {
                    return Err(Error::TooFewQubitsForHop { hop: 2, n_qubits })
                }
                _ => {}
            }
            let mut rng = rng::stream(seed, spec.kind as u64, Purpose::NoiseEpsilons);
            compiled.perturbations.push(Perturbation {
                kind: spec.kind,
                epsilons: sample_epsilons(spec.rate, n_qubits, &mut rng),
                targets,
            });
        }
    }
    Ok(compiled)
}
