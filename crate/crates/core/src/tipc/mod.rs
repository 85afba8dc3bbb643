//! Temporal information processing capacity.
//!
//! States are centered and rank-normalized by a compact SVD, then projected onto an
//! orthonormalized product basis of input history and state history. The squared
//! projection norms are the capacities; terms below a noise threshold are discarded and
//! the remainder is totalled per degree, split into time-invariant (input-only) and
//! time-variant (state-dependent) parts.

mod basis;
mod capacity;
mod gram;
mod normalize;

pub use basis::{
    enumerate_bases, evaluate_bases, legendre, term_count, BasisCaps, BasisEvaluator,
    BasisFamily, BasisTerm, InputRange,
};
pub use capacity::{
    capacities, capacity_of, chi2_threshold, chi2_upper_quantile, profile,
    shuffle_surrogate_threshold, surrogate_capacities, CapacityProfile, CapacityRecord,
    DegreeTotals, TermClass, ThresholdInfo,
};
pub use gram::{orthonormalize, Orthonormalized, Orthonormalizer, DEPENDENCE_TOL};
pub use normalize::{normalize_states, normalize_states_from, NormalizedStates, STATE_RMS_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{Provenance, StateMatrix};

/// Truncation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Threshold {
    /// `C_th = sigma Q_{chi^2(r)}(1 - p) / T`.
    Chi2 { p: f64, sigma: f64 },
    /// `C_th = sigma * max` capacity over time-shuffled input surrogates.
    Shuffle { surrogates: usize, sigma: f64, seed: u64 },
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Chi2 { p: 1e-4, sigma: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipcSettings {
    pub max_degree: u32,
    pub max_input_delay: usize,
    pub max_state_delay: usize,
    pub family: BasisFamily,
    pub input_range: InputRange,
    pub threshold: Threshold,
    /// Relative singular-value cutoff of the state normalization.
    pub sv_cutoff: f64,
    pub term_cap: usize,
}

impl Default for TipcSettings {
    fn default() -> Self {
        Self {
            max_degree: 3,
            max_input_delay: 20,
            max_state_delay: 2,
            family: BasisFamily::Legendre,
            input_range: InputRange::UNIT,
            threshold: Threshold::default(),
            sv_cutoff: 1e-8,
            term_cap: 20_000,
        }
    }
}

impl TipcSettings {
    pub fn caps(&self) -> BasisCaps {
        BasisCaps {
            max_degree: self.max_degree,
            max_input_delay: self.max_input_delay,
            max_state_delay: self.max_state_delay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 || self.max_input_delay == 0 {
            return Err(Error::InvalidParameter(
                "TIPC needs max_degree >= 1 and max_input_delay >= 1".into(),
            ));
        }
        self.input_range.validate()?;
        if !(self.sv_cutoff >= 0.0 && self.sv_cutoff < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sv_cutoff {} outside [0, 1)",
                self.sv_cutoff
            )));
        }
        match self.threshold {
            Threshold::Chi2 { p, sigma } => {
                if !(p > 0.0 && p < 1.0 && sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "chi-squared threshold needs p in (0, 1) and sigma > 0, got p={p}, sigma={sigma}"
                    )));
                }
            }
            Threshold::Shuffle {
                surrogates, sigma, ..
            } => {
                if surrogates == 0 || sigma.is_nan() || sigma <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "shuffle threshold needs surrogates >= 1 and sigma > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Capacity records and their aggregated profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipcReport {
    pub settings: TipcSettings,
    pub profile: CapacityProfile,
    pub records: Vec<CapacityRecord>,
}

impl TipcReport {
    /// Capacity of the term with the given label, 0 if absent.
    pub fn capacity(&self, label: &str) -> f64 {
        self.records
            .iter()
            .find(|r| r.label == label)
            .map_or(0.0, |r| r.capacity)
    }
}

/// Full TIPC decomposition of `states` driven by `inputs`.
pub fn analyze(states: &StateMatrix, inputs: &[f64], settings: &TipcSettings) -> Result<TipcReport> {
    settings.validate()?;
    if states.n_steps() != inputs.len() {
        return Err(Error::LengthMismatch {
            what: "states vs inputs",
            left: states.n_steps(),
            right: inputs.len(),
        });
    }
    let caps = settings.caps();
    let h = caps.history();
    if h + 2 > inputs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} steps are too few for a {h}-step history",
            inputs.len()
        )));
    }
    let t_eff = inputs.len() - h;
    let norm = normalize_states_from(states, h, settings.sv_cutoff)?;
    let rank = norm.rank();
    if rank == 0 {
        return Ok(TipcReport {
            settings: settings.clone(),
            profile: CapacityProfile::empty(t_eff, settings.max_degree),
            records: Vec::new(),
        });
    }
    let terms = enumerate_bases(&caps, rank, settings.family, settings.term_cap)?;
    let p = norm.p();
    // State factors use the projection rescaled to unit RMS.
    let z = norm.projected() * (t_eff as f64).sqrt();
    let evaluator = BasisEvaluator::new(inputs, Some(&z), settings.family, settings.input_range, h)?;
    let p_cols = capacity::columns(&p);

    let mut gs = Orthonormalizer::centered(t_eff);
    let mut records = Vec::new();
    let mut dropped = 0;
    let mut visited = 0;
    for term in &terms {
        if gs.is_full() {
            break;
        }
        visited += 1;
        let col = evaluator.column(term)?;
        match gs.push(col) {
            Some(i) => {
                let c = capacity_of(gs.vector(i), &p_cols);
                records.push(CapacityRecord::new(term.clone(), c));
            }
            None => dropped += 1,
        }
    }

    let info = match settings.threshold {
        Threshold::Chi2 { p: tail, sigma } => ThresholdInfo::Chi2 {
            p: tail,
            sigma,
            value: chi2_threshold(t_eff, rank, tail, sigma)?,
        },
        Threshold::Shuffle {
            surrogates,
            sigma,
            seed,
        } => ThresholdInfo::Shuffle {
            surrogates,
            sigma,
            seed,
            value: shuffle_surrogate_threshold(&p, &evaluator, inputs, &terms, surrogates, sigma, seed)?,
        },
    };
    let mut prof = profile(&mut records, rank, t_eff, settings.max_degree, info);
    prof.terms_enumerated = terms.len();
    prof.terms_retained = records.len();
    prof.terms_dropped = dropped;
    prof.terms_unvisited = terms.len() - visited;
    Ok(TipcReport {
        settings: settings.clone(),
        profile: prof,
        records,
    })
}

/// Input-only capacity profile of a target sequence, describing what a task demands.
pub fn ipc_of_target(target: &[f64], inputs: &[f64], settings: &TipcSettings) -> Result<TipcReport> {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n.max(1.0);
    if target.iter().all(|v| (v - mean).abs() <= 1e-15 * mean.abs().max(1.0)) {
        return Err(Error::ZeroVariance);
    }
    let y = StateMatrix::from_column(target, Provenance::Simulated)?;
    let mut s = settings.clone();
    s.max_state_delay = 0;
    analyze(&y, inputs, &s)
}

/// One profile per feature column, for per-qubit attribution.
pub fn per_feature(states: &StateMatrix, inputs: &[f64], settings: &TipcSettings) -> Result<Vec<TipcReport>> {
    (0..states.n_features())
        .map(|k| analyze(&states.feature(k), inputs, settings))
        .collect()
}
