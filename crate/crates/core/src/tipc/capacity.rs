use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::basis::{BasisEvaluator, BasisTerm};
use super::gram::inner;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermClass {
    TimeInvariant,
    TimeVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub term: BasisTerm,
    pub label: String,
    pub capacity: f64,
    pub truncated: bool,
    pub class: TermClass,
}

impl CapacityRecord {
    pub fn new(term: BasisTerm, capacity: f64) -> Self {
        let class = if term.is_time_invariant() {
            TermClass::TimeInvariant
        } else {
            TermClass::TimeVariant
        };
        Self {
            label: term.label(),
            term,
            capacity,
            truncated: false,
            class,
        }
    }

    /// Capacity after truncation.
    pub fn retained_capacity(&self) -> f64 {
        if self.truncated {
            0.0
        } else {
            self.capacity
        }
    }
}

/// `||xi^T P||^2` for a unit vector `xi` against the columns of `p`.
pub fn capacity_of(xi: &[f64], p_columns: &[Vec<f64>]) -> f64 {
    p_columns.iter().map(|c| inner(xi, c).powi(2)).sum()
}

pub(crate) fn columns(p: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..p.ncols()).map(|k| p.column(k).iter().copied().collect()).collect()
}

/// Capacities of the columns of `xi` (assumed orthonormal) against `p`.
pub fn capacities(p: &DMatrix<f64>, xi: &DMatrix<f64>) -> Result<Vec<f64>> {
    if p.nrows() != xi.nrows() {
        return Err(Error::LengthMismatch {
            what: "basis rows vs state rows",
            left: xi.nrows(),
            right: p.nrows(),
        });
    }
    let pc = columns(p);
    Ok((0..xi.ncols())
        .map(|j| {
            let col: Vec<f64> = xi.column(j).iter().copied().collect();
            capacity_of(&col, &pc)
        })
        .collect())
}

/// `x` with `P(X > x) = p` for `X ~ chi^2(dof)`.
pub fn chi2_upper_quantile(dof: usize, p: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidParameter("chi-squared needs dof >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange {
            name: "tail probability",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let k = dof as f64 / 2.0;
    let tail = |x: f64| gamma_ur(k, x / 2.0);
    let mut hi = dof as f64 + 10.0;
    while tail(hi) > p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    // Bisection to ulp resolution; the tail is monotone so this cannot fail.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `sigma * Q_{chi^2(r)}(1 - p) / T`.
pub fn chi2_threshold(t_len: usize, rank: usize, p: f64, sigma: f64) -> Result<f64> {
    if rank == 0 {
        return Err(Error::InvalidParameter(
            "threshold undefined for rank 0".into(),
        ));
    }
    if t_len == 0 {
        return Err(Error::InvalidParameter("threshold needs T > 0".into()));
    }
    Ok(sigma * chi2_upper_quantile(rank, p)? / t_len as f64)
}

/// Capacities of input-dependent terms evaluated on time-shuffled copies of the input.
/// Each column is centered and normalized but not orthogonalized against the others.
pub fn surrogate_capacities(
    p: &DMatrix<f64>,
    evaluator: &BasisEvaluator<'_>,
    inputs: &[f64],
    terms: &[BasisTerm],
    n_surrogates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let pc = columns(p);
    let used: Vec<&BasisTerm> = terms.iter().filter(|t| t.input_order() > 0).collect();
    (0..n_surrogates)
        .into_par_iter()
        .map(|s| {
            let mut shuffled = inputs.to_vec();
            shuffled.shuffle(&mut rng::stream(seed, s as u64, Purpose::Shuffle));
            used.iter()
                .map(|term| {
                    let mut col = evaluator.column_with(term, &shuffled)?;
                    let mean = col.iter().sum::<f64>() / col.len() as f64;
                    col.iter_mut().for_each(|v| *v -= mean);
                    let norm = inner(&col, &col).sqrt();
                    if norm <= f64::EPSILON * (col.len() as f64).sqrt() {
                        return Ok(0.0);
                    }
                    col.iter_mut().for_each(|v| *v /= norm);
                    Ok(capacity_of(&col, &pc))
                })
                .collect()
        })
        .collect()
}

/// `sigma * max` over all surrogate capacities.
pub fn shuffle_surrogate_threshold(
    p: &DMatrix<f64>,
    evaluator: &BasisEvaluator<'_>,
    inputs: &[f64],
    terms: &[BasisTerm],
    n_surrogates: usize,
    sigma: f64,
    seed: u64,
) -> Result<f64> {
    if n_surrogates == 0 {
        return Err(Error::InvalidParameter("need at least one surrogate".into()));
    }
    let caps = surrogate_capacities(p, evaluator, inputs, terms, n_surrogates, seed)?;
    let max = caps.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
    Ok(sigma * max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeTotals {
    pub degree: u32,
    pub tiv: f64,
    pub tv: f64,
}

/// How the truncation threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ThresholdInfo {
    Chi2 { p: f64, sigma: f64, value: f64 },
    Shuffle { surrogates: usize, sigma: f64, seed: u64, value: f64 },
    /// Rank zero: nothing to threshold.
    Undefined,
}

impl ThresholdInfo {
    pub fn value(&self) -> Option<f64> {
        match *self {
            ThresholdInfo::Chi2 { value, .. } | ThresholdInfo::Shuffle { value, .. } => Some(value),
            ThresholdInfo::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityProfile {
    pub rank: usize,
    /// Rows entering the analysis after discarding the history window.
    pub t_eff: usize,
    pub threshold: ThresholdInfo,
    pub per_degree: Vec<DegreeTotals>,
    pub tiv_total: f64,
    pub tv_total: f64,
    pub total: f64,
    pub terms_enumerated: usize,
    pub terms_retained: usize,
    pub terms_dropped: usize,
    /// Terms never evaluated because the retained basis already spanned the data.
    pub terms_unvisited: usize,
}

impl CapacityProfile {
    pub fn empty(t_eff: usize, max_degree: u32) -> Self {
        Self {
            rank: 0,
            t_eff,
            threshold: ThresholdInfo::Undefined,
            per_degree: (1..=max_degree)
                .map(|degree| DegreeTotals {
                    degree,
                    tiv: 0.0,
                    tv: 0.0,
                })
                .collect(),
            tiv_total: 0.0,
            tv_total: 0.0,
            total: 0.0,
            terms_enumerated: 0,
            terms_retained: 0,
            terms_dropped: 0,
            terms_unvisited: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rank == 0 && self.total == 0.0
    }

    pub fn tiv_fraction(&self) -> f64 {
        if self.total > 0.0 {
            self.tiv_total / self.total
        } else {
            0.0
        }
    }

    pub fn degree(&self, d: u32) -> Option<&DegreeTotals> {
        self.per_degree.iter().find(|t| t.degree == d)
    }
}

/// Marks records below `threshold` as truncated and aggregates the rest per degree.
pub fn profile(
    records: &mut [CapacityRecord],
    rank: usize,
    t_eff: usize,
    max_degree: u32,
    threshold: ThresholdInfo,
) -> CapacityProfile {
    let mut out = CapacityProfile::empty(t_eff, max_degree);
    out.rank = rank;
    out.threshold = threshold;
    let cut = threshold.value().unwrap_or(f64::INFINITY);
    for r in records.iter_mut() {
        r.truncated = r.capacity < cut;
        let c = r.retained_capacity();
        let d = r.term.degree();
        if out.degree(d).is_none() {
            out.per_degree.push(DegreeTotals {
                degree: d,
                tiv: 0.0,
                tv: 0.0,
            });
        }
        let slot = out.per_degree.iter_mut().find(|t| t.degree == d).unwrap();
        match r.class {
            TermClass::TimeInvariant => {
                slot.tiv += c;
                out.tiv_total += c;
            }
            TermClass::TimeVariant => {
                slot.tv += c;
                out.tv_total += c;
            }
        }
    }
    out.total = out.tiv_total + out.tv_total;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Composite Simpson integral of the chi-squared density on [0, x].
    fn simpson_cdf(dof: usize, x: f64) -> f64 {
        let k = dof as f64 / 2.0;
        let ln_norm = -(k * 2f64.ln() + statrs::function::gamma::ln_gamma(k));
        // With t = s^2 the integrand 2 s f(s^2) is smooth at 0 for every dof.
        let g = |s: f64| 2.0 * (ln_norm - s * s / 2.0).exp() * s.powi(dof as i32 - 1);
        let n = 200_000;
        let b = x.sqrt();
        let h = b / n as f64;
        let mut acc = g(0.0) + g(b);
        for i in 1..n {
            acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn quantile_matches_numeric_integration() {
        for (dof, p) in [(1, 0.5), (2, 1e-4), (4, 1e-2), (4, 1e-4), (7, 0.05)] {
            let q = chi2_upper_quantile(dof, p).unwrap();
            assert!((1.0 - simpson_cdf(dof, q) - p).abs() < 1e-8, "dof {dof} p {p}");
        }
    }

    #[test]
    fn quantile_closed_forms() {
        let q = chi2_upper_quantile(2, 1e-4).unwrap();
        assert_relative_eq!(q, -2.0 * 1e-4_f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(q, 18.4207, epsilon = 1e-4);
        assert_relative_eq!(chi2_upper_quantile(1, 0.5).unwrap(), 0.454936, epsilon = 1e-6);
    }

    #[test]
    fn threshold_scaling() {
        let a = chi2_threshold(1000, 2, 1e-4, 1.0).unwrap();
        assert_relative_eq!(a, 18.420680743952367 / 1000.0, epsilon = 1e-12);
        assert_relative_eq!(chi2_threshold(1000, 2, 1e-4, 2.0).unwrap(), 2.0 * a);
        assert!(chi2_threshold(1000, 0, 1e-4, 2.0).is_err());
    }
}
