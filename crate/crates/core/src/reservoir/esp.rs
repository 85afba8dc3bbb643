use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qnr::{run_compiled, InitialState, QnrConfig};
use crate::error::{Error, Result};
use crate::qsim::{haar_random_qubit, DensityMatrix};
use crate::rng::{self, Purpose};

/// Values of the mean distance below this are treated as numerical floor.
pub const ESP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspResult {
    /// `mean_{m != 1} ||x_t^(m) - x_t^(1)||_2` for each step.
    pub distance: Vec<f64>,
    /// Least-squares slope of `ln distance` against `t` over the pre-floor segment.
    pub slope: Option<f64>,
    /// Number of leading steps used in the fit.
    pub fit_len: usize,
}

/// Haar-random pure product states for `n_trials` runs, one stream per trial.
pub fn random_product_states(n_qubits: usize, n_trials: usize, seed: u64) -> Vec<Vec<DensityMatrix>> {
    (0..n_trials)
        .map(|m| {
            let mut r = rng::stream(seed, m as u64, Purpose::InitialStates);
            (0..n_qubits).map(|_| haar_random_qubit(&mut r)).collect()
        })
        .collect()
}

/// Drives the reservoir from each initial state with the same inputs and tracks how fast
/// the trajectories merge.
pub fn esp_probe(
    config: &QnrConfig,
    inputs: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<EspResult> {
    let initial = random_product_states(config.n_qubits, n_trials, seed);
    esp_probe_with(config, inputs, &initial)
}

pub fn esp_probe_with(
    config: &QnrConfig,
    inputs: &[f64],
    initial: &[Vec<DensityMatrix>],
) -> Result<EspResult> {
    if initial.len() < 2 {
        return Err(Error::InvalidParameter(
            "echo-state probe needs at least two trials".into(),
        ));
    }
    let compiled = config.compile()?;
    let runs = initial
        .par_iter()
        .map(|states| {
            run_compiled(
                config,
                &compiled,
                &InitialState::Product(states.clone()),
                inputs,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = &runs[0];
    let distance: Vec<f64> = (0..inputs.len())
        .map(|t| {
            runs[1..]
                .iter()
                .map(|x| {
                    (0..x.n_features())
                        .map(|k| (x.get(t, k) - reference.get(t, k)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / (runs.len() - 1) as f64
        })
        .collect();
    let fit_len = distance
        .iter()
        .position(|&d| d <= ESP_FLOOR)
        .unwrap_or(distance.len());
    let slope = log_slope(&distance[..fit_len]);
    Ok(EspResult {
        distance,
        slope,
        fit_len,
    })
}

/// Least-squares slope of `ln y_t` against `t`.
pub fn log_slope(y: &[f64]) -> Option<f64> {
    if y.len() < 2 || y.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lm = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in ly.iter().enumerate() {
        let dt = t as f64 - tm;
        sxy += dt * (l - lm);
        sxx += dt * dt;
    }
    Some(sxy / sxx)
}
