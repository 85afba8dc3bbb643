use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::states::{Provenance, StateMatrix};
use crate::error::{check_unit_interval, Error, Result};
use crate::rng::{self, Purpose};

/// Echo state network `x_{t+1} = tanh(rho W x_t + iota w_in u_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnConfig {
    pub n_nodes: usize,
    pub spectral_radius: f64,
    #[serde(default = "default_input_scaling")]
    pub input_scaling: f64,
    #[serde(default = "default_internal_density")]
    pub internal_density: f64,
    #[serde(default = "default_input_density")]
    pub input_density: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_input_scaling() -> f64 {
    0.1
}
fn default_internal_density() -> f64 {
    0.5
}
fn default_input_density() -> f64 {
    0.1
}

impl EsnConfig {
    pub fn new(n_nodes: usize, spectral_radius: f64, seed: u64) -> Self {
        Self {
            n_nodes,
            spectral_radius,
            input_scaling: default_input_scaling(),
            internal_density: default_internal_density(),
            input_density: default_input_density(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidParameter("ESN needs at least one node".into()));
        }
        if !(self.spectral_radius.is_finite() && self.spectral_radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spectral radius must be finite and nonnegative, got {}",
                self.spectral_radius
            )));
        }
        if !self.input_scaling.is_finite() {
            return Err(Error::InvalidParameter("input scaling must be finite".into()));
        }
        check_unit_interval("internal connection probability", self.internal_density)?;
        check_unit_interval("input connection probability", self.input_density)
    }
}

/// Largest absolute eigenvalue.
pub fn spectral_radius(w: &DMatrix<f64>) -> f64 {
    w.complex_eigenvalues()
        .iter()
        .fold(0.0, |m, z| m.max(z.norm()))
}

/// Sparse `U[0, 1]` weights; `W` rescaled to unit spectral radius.
pub fn esn_weights(config: &EsnConfig) -> Result<(DMatrix<f64>, DVector<f64>)> {
    config.validate()?;
    let n = config.n_nodes;
    let mut r = rng::stream(config.seed, 0, Purpose::EsnWeights);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if r.random::<f64>() < config.internal_density {
                w[(i, j)] = r.random::<f64>();
            }
        }
    }
    let w_in = DVector::from_fn(n, |_, _| {
        if r.random::<f64>() < config.input_density {
            r.random::<f64>()
        } else {
            0.0
        }
    });
    let radius = spectral_radius(&w);
    if radius > 0.0 {
        w /= radius;
    }
    Ok((w, w_in))
}

/// Runs the network from `x = 0`; row `t` holds the state after input `u_t`.
pub fn run_esn(config: &EsnConfig, inputs: &[f64]) -> Result<StateMatrix> {
    if let Some(t) = inputs.iter().position(|u| !u.is_finite()) {
        return Err(Error::NonFinite { row: t, col: 0 });
    }
    let (w, w_in) = esn_weights(config)?;
    let n = config.n_nodes;
    let w = w * config.spectral_radius;
    let w_in = w_in * config.input_scaling;
    let mut x = DVector::zeros(n);
    let mut data = DMatrix::zeros(inputs.len(), n);
    for (t, &u) in inputs.iter().enumerate() {
        let mut pre = &w * &x;
        pre.axpy(u, &w_in, 1.0);
        x = pre.map(f64::tanh);
        data.row_mut(t).copy_from(&x.transpose());
    }
    StateMatrix::new(data, Provenance::Simulated)
}
