use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a state matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Ingested,
}

/// `T x N` matrix of reservoir features, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    data: DMatrix<f64>,
    provenance: Provenance,
}

impl StateMatrix {
    /// Wraps `data`, rejecting NaN and infinite entries.
    pub fn new(data: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self { data, provenance })
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                what: "state row width",
                left: n,
                right: rows[bad].len(),
            });
        }
        let data = DMatrix::from_fn(rows.len(), n, |t, k| rows[t][k]);
        Self::new(data, provenance)
    }

    /// Single-feature matrix holding a sequence, e.g. a target treated as a state.
    pub fn from_column(values: &[f64], provenance: Provenance) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values), provenance)
    }

    pub fn n_steps(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[(t, k)]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.data.row(t).iter().copied().collect()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.data.column(k).iter().copied().collect()
    }

    /// One-column matrix of feature `k`.
    pub fn feature(&self, k: usize) -> StateMatrix {
        StateMatrix {
            data: self.data.columns(k, 1).into_owned(),
            provenance: self.provenance,
        }
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<StateMatrix> {
        Self::new(&self.data * factor, self.provenance)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Concatenates feature columns of reservoirs driven by the same input.
pub fn spatial_multiplex(matrices: &[StateMatrix]) -> Result<StateMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to multiplex".into()))?;
    let t = first.n_steps();
    for m in matrices {
        if m.n_steps() != t {
            return Err(Error::LengthMismatch {
                what: "multiplexed time steps",
                left: t,
                right: m.n_steps(),
            });
        }
    }
    let n: usize = matrices.iter().map(StateMatrix::n_features).sum();
    let mut data = DMatrix::zeros(t, n);
    let mut col = 0;
    for m in matrices {
        data.columns_mut(col, m.n_features()).copy_from(&m.data);
        col += m.n_features();
    }
    let provenance = if matrices.iter().all(|m| m.provenance == Provenance::Simulated) {
        Provenance::Simulated
    } else {
        Provenance::Ingested
    };
    Ok(StateMatrix { data, provenance })
}
