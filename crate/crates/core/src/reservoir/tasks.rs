use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Second-order NARMA target
/// `y_t = 0.4 y_{t-1} + 0.4 y_{t-1} y_{t-2} + 0.6 (0.3 u_t)^3 + 0.1`, with `y_{-1} = y_{-2} = 0`.
///
/// The benchmark drives it with `u_t` uniform on `[0, 1]`; other bounded inputs are
/// accepted so the same target can be analysed under a symmetric input distribution.
pub fn narma2(inputs: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(inputs.len());
    let (mut y1, mut y2) = (0.0, 0.0);
    for &u in inputs {
        let v = 0.4 * y1 + 0.4 * y1 * y2 + 0.6 * (0.3 * u).powi(3) + 0.1;
        y.push(v);
        y2 = y1;
        y1 = v;
    }
    y
}

/// i.i.d. uniform inputs on `[lo, hi)`.
pub fn uniform_inputs<R: Rng + ?Sized>(len: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

/// Washout / train / evaluation lengths, laid out consecutively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub washout: usize,
    pub train: usize,
    pub eval: usize,
}

impl Split {
    /// 9,998 / 20,000 / 20,000.
    pub const PAPER: Split = Split {
        washout: 9_998,
        train: 20_000,
        eval: 20_000,
    };
    /// 1,000 / 2,000 / 2,000.
    pub const DESK: Split = Split {
        washout: 1_000,
        train: 2_000,
        eval: 2_000,
    };

    pub fn total(&self) -> usize {
        self.washout + self.train + self.eval
    }

    pub fn train_range(&self) -> Range<usize> {
        self.washout..self.washout + self.train
    }

    pub fn eval_range(&self) -> Range<usize> {
        self.washout + self.train..self.total()
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.eval == 0 {
            return Err(Error::InvalidParameter(
                "train and eval lengths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn narma2_examples() {
        let y = narma2(&[0.0, 0.0]);
        assert_abs_diff_eq!(y[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.14, epsilon = 1e-15);
        let y = narma2(&vec![0.0; 500]);
        // Root of 0.4 y^2 - 0.6 y + 0.1 = 0 below 1.
        let fixed = (0.6 - (0.36_f64 - 0.16).sqrt()) / 0.8;
        assert_abs_diff_eq!(y[499], fixed, epsilon = 1e-12);
        assert_abs_diff_eq!(fixed, 0.190983, epsilon = 1e-6);
        assert_abs_diff_eq!(0.4 * fixed + 0.4 * fixed * fixed + 0.1, fixed, epsilon = 1e-15);
        assert_abs_diff_eq!(narma2(&[1.0])[0], 0.1162, epsilon = 1e-15);
    }

    #[test]
    fn split_layout() {
        let s = Split::DESK;
        assert_eq!(s.total(), 5_000);
        assert_eq!(s.train_range(), 1_000..3_000);
        assert_eq!(s.eval_range(), 3_000..5_000);
        assert_eq!(Split::PAPER.total(), 49_998);
    }
}
