use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::reservoir::StateMatrix;

/// Singular directions whose RMS amplitude `sigma / sqrt(T)` falls below this are noise.
pub const STATE_RMS_FLOOR: f64 = 1e-9;

/// Rank-normalized states `X - mean = P Sigma Q^T` over the analysed rows.
#[derive(Debug, Clone)]
pub struct NormalizedStates {
    /// `(X - mean) Q Sigma^{-1}` on every row of `X`; rows `start..` are orthonormal.
    projected: DMatrix<f64>,
    start: usize,
    singular_values: Vec<f64>,
    cutoff: f64,
}

impl NormalizedStates {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Orthonormal `T' x r` factor over the analysed rows.
    pub fn p(&self) -> DMatrix<f64> {
        let rows = self.projected.nrows() - self.start;
        self.projected.rows(self.start, rows).into_owned()
    }

    /// Projection of every row of `X`, including history rows before `start`.
    pub fn projected(&self) -> &DMatrix<f64> {
        &self.projected
    }
}

/// [`normalize_states_from`] over all rows.
pub fn normalize_states(x: &StateMatrix, sv_cutoff: f64) -> Result<NormalizedStates> {
    normalize_states_from(x, 0, sv_cutoff)
}

/// Centers rows `start..` of `x` and keeps singular directions with
/// `sigma_i >= sv_cutoff * sigma_max` (and above the absolute RMS floor).
/// Each column of `P` is signed so its largest-magnitude entry is positive.
pub fn normalize_states_from(x: &StateMatrix, start: usize, sv_cutoff: f64) -> Result<NormalizedStates> {
    let data = x.data();
    let (t, n) = data.shape();
    let rows = t.saturating_sub(start);
    let empty = |cutoff| NormalizedStates {
        projected: DMatrix::zeros(t, 0),
        start,
        singular_values: Vec::new(),
        cutoff,
    };
    if rows == 0 || n == 0 {
        return Ok(empty(sv_cutoff));
    }
    let block = data.rows(start, rows);
    let mean = DVector::from_fn(n, |k, _| block.column(k).mean());
    let mut centered = block.into_owned();
    for k in 0..n {
        centered.column_mut(k).add_scalar_mut(-mean[k]);
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let floor = STATE_RMS_FLOOR * (rows as f64).sqrt();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let s = svd.singular_values[i];
            s > floor && s >= sv_cutoff * smax
        })
        .collect();
    if kept.is_empty() {
        return Ok(empty(sv_cutoff));
    }
    let mut all = data.clone();
    for k in 0..n {
        all.column_mut(k).add_scalar_mut(-mean[k]);
    }
    let mut projected = DMatrix::zeros(t, kept.len());
    let mut singular_values = Vec::with_capacity(kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let s = svd.singular_values[i];
        let dir = v_t.row(i).transpose();
        let mut col = &all * dir / s;
        let (mut best, mut sign) = (0.0, 1.0);
        for v in col.rows(start, rows).iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        col *= sign;
        projected.set_column(j, &col);
        singular_values.push(s);
    }
    Ok(NormalizedStates {
        projected,
        start,
        singular_values,
        cutoff: sv_cutoff,
    })
}
