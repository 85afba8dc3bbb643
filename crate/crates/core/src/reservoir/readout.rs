use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::states::StateMatrix;
use crate::error::{Error, Result};

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `||A w - y||_2` over the training rows.
    pub residual_norm: f64,
    pub rank: usize,
    /// Ratio of largest to smallest retained singular value.
    pub condition: f64,
    /// Set when every state feature is zero over the training rows.
    pub degenerate: bool,
}

/// Linear readout `y_t = w . x_t (+ b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub weights: Vec<f64>,
    pub bias: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

fn check_range(range: &Range<usize>, len: usize) -> Result<()> {
    if range.start >= range.end || range.end > len {
        return Err(Error::InvalidRange {
            start: range.start,
            end: range.end,
            len,
        });
    }
    Ok(())
}

fn design(x: &StateMatrix, rows: Range<usize>, bias: bool) -> DMatrix<f64> {
    let n = x.n_features();
    let m = rows.len();
    let cols = n + usize::from(bias);
    DMatrix::from_fn(m, cols, |i, k| {
        if k < n {
            x.get(rows.start + i, k)
        } else {
            1.0
        }
    })
}

/// Minimum-norm least-squares solution of `a w = y` through the SVD pseudo-inverse.
/// Returns the solution and the retained singular values.
pub fn min_norm_lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
    let (m, n) = a.shape();
    // For tall systems solve the equivalent square problem R w = Q^T y.
    let (core, rhs) = if m > 2 * n {
        let qr = a.clone().qr();
        let rhs = qr.q().tr_mul(y);
        (qr.r(), rhs)
    } else {
        (a.clone(), y.clone())
    };
    let svd = core.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut w = DVector::zeros(n);
    let mut kept = Vec::new();
    if smax == 0.0 {
        return (w, kept);
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_CUTOFF * smax {
            let coef = u.column(i).dot(&rhs) / s;
            w.axpy(coef, &v_t.row(i).transpose(), 1.0);
            kept.push(s);
        }
    }
    (w, kept)
}

/// Fits the readout on `train` rows of `x` against `y` (same time axis as `x`).
pub fn fit_readout(x: &StateMatrix, y: &[f64], train: Range<usize>, bias: bool) -> Result<Readout> {
    if y.len() != x.n_steps() {
        return Err(Error::LengthMismatch {
            what: "targets vs states",
            left: y.len(),
            right: x.n_steps(),
        });
    }
    check_range(&train, y.len())?;
    if let Some(t) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: t, col: 0 });
    }
    let a = design(x, train.clone(), bias);
    let target = DVector::from_column_slice(&y[train.clone()]);
    let (mut w, kept) = min_norm_lstsq(&a, &target);
    let n = x.n_features();
    let degenerate = a.columns(0, n).iter().all(|&v| v == 0.0);
    if degenerate {
        w.rows_mut(0, n).fill(0.0);
    }
    let residual_norm = (&a * &w - &target).norm();
    let condition = match (kept.first(), kept.last()) {
        (Some(hi), Some(lo)) => hi / lo,
        _ => f64::INFINITY,
    };
    Ok(Readout {
        weights: w.rows(0, n).iter().copied().collect(),
        bias: bias.then(|| w[n]),
        diagnostics: FitDiagnostics {
            residual_norm,
            rank: kept.len(),
            condition,
            degenerate,
        },
    })
}

impl Readout {
    pub fn predict(&self, x: &StateMatrix) -> Result<Vec<f64>> {
        if x.n_features() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                left: self.weights.len(),
                right: x.n_features(),
            });
        }
        let b = self.bias.unwrap_or(0.0);
        Ok((0..x.n_steps())
            .map(|t| {
                self.weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * x.get(t, k))
                    .sum::<f64>()
                    + b
            })
            .collect())
    }
}

/// Root-mean-square error over `range`, divided by the standard deviation of `y` there.
pub fn nrmse(y: &[f64], yhat: &[f64], range: Range<usize>) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            what: "targets vs predictions",
            left: y.len(),
            right: yhat.len(),
        });
    }
    check_range(&range, y.len())?;
    let ys = &y[range.clone()];
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 || var.sqrt() <= 1e-15 * mean.abs() {
        return Err(Error::ZeroVariance);
    }
    let mse = ys
        .iter()
        .zip(&yhat[range])
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    Ok((mse / var).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::states::Provenance;
    use approx::assert_abs_diff_eq;

    fn states(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> StateMatrix {
        StateMatrix::new(DMatrix::from_fn(rows, cols, f), Provenance::Simulated).unwrap()
    }

    #[test]
    fn realizable_target_is_recovered() {
        let x = states(200, 3, |t, k| ((t * (k + 3)) as f64 * 0.37).sin());
        let y: Vec<f64> = (0..200)
            .map(|t| 0.5 * x.get(t, 0) - 2.0 * x.get(t, 2) + 0.25)
            .collect();
        let r = fit_readout(&x, &y, 0..200, true).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r.diagnostics.residual_norm <= 1e-10 * ynorm);
        assert_abs_diff_eq!(r.weights[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(r.bias.unwrap(), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn zero_states_give_mean_predictor() {
        let x = states(50, 4, |_, _| 0.0);
        let y: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let r = fit_readout(&x, &y, 0..50, true).unwrap();
        assert!(r.diagnostics.degenerate);
        assert!(r.weights.iter().all(|&w| w == 0.0));
        assert_abs_diff_eq!(r.bias.unwrap(), 24.5, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_selects_min_norm() {
        // Two identical columns: min-norm splits weight evenly.
        let x = states(100, 2, |t, _| (t as f64 * 0.1).cos());
        let y: Vec<f64> = (0..100).map(|t| 3.0 * x.get(t, 0)).collect();
        let r = fit_readout(&x, &y, 0..100, false).unwrap();
        assert_eq!(r.diagnostics.rank, 1);
        // Ridge oracle: QR solve of the stacked system [A; sqrt(λ) I] w = [y; 0], λ small.
        let a = design(&x, 0..100, false);
        let lambda: f64 = 1e-10;
        let mut stacked = DMatrix::zeros(102, 2);
        stacked.rows_mut(0, 100).copy_from(&a);
        stacked[(100, 0)] = lambda.sqrt();
        stacked[(101, 1)] = lambda.sqrt();
        let mut rhs = DVector::zeros(102);
        rhs.rows_mut(0, 100).copy_from(&DVector::from_column_slice(&y));
        let qr = stacked.qr();
        let reg = qr.r().solve_upper_triangular(&qr.q().tr_mul(&rhs)).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(r.weights[k], reg[k], epsilon = 1e-6);
            assert_abs_diff_eq!(r.weights[k], 1.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn nrmse_examples() {
        let y: Vec<f64> = (0..20).map(|t| (t as f64).sqrt()).collect();
        assert_eq!(nrmse(&y, &y, 0..20).unwrap(), 0.0);
        let mean = y.iter().sum::<f64>() / 20.0;
        assert_abs_diff_eq!(nrmse(&y, &[mean; 20], 0..20).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(nrmse(&[1.0; 5], &[1.0; 5], 0..5), Err(Error::ZeroVariance)));
        assert!(nrmse(&y, &y, 5..30).is_err());
    }
}
