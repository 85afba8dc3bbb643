use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input polynomial family. State factors are always raw powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Monomial,
    Legendre,
}

/// Declared support of the input distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRange {
    pub lo: f64,
    pub hi: f64,
}

impl InputRange {
    pub const UNIT: InputRange = InputRange { lo: 0.0, hi: 1.0 };
    pub const SYMMETRIC: InputRange = InputRange { lo: -1.0, hi: 1.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "input range [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Affine map onto `[-1, 1]`.
    pub fn to_symmetric(&self, u: f64) -> f64 {
        2.0 * (u - self.lo) / (self.hi - self.lo) - 1.0
    }
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre(n: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    match n {
        0 => p0,
        1 => p1,
        _ => {
            for k in 1..n {
                let k = f64::from(k);
                let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// One product basis function.
///
/// `input` holds `(delay, exponent)` pairs with delay `d >= 1` standing for the
/// input `d - 1` steps before the current one; `state` holds `(feature, delay, exponent)`
/// with delay `s >= 1` meaning the normalized state `s` steps back.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTerm {
    pub input: Vec<(usize, u32)>,
    pub state: Vec<(usize, usize, u32)>,
    pub family: BasisFamily,
}

impl BasisTerm {
    /// `N_j`.
    pub fn input_order(&self) -> u32 {
        self.input.iter().map(|&(_, e)| e).sum()
    }

    /// `M_j`.
    pub fn state_order(&self) -> u32 {
        self.state.iter().map(|&(_, _, e)| e).sum()
    }

    pub fn degree(&self) -> u32 {
        self.input_order() + self.state_order()
    }

    pub fn max_delay(&self) -> usize {
        let a = self.input.iter().map(|&(d, _)| d).max().unwrap_or(0);
        let b = self.state.iter().map(|&(_, s, _)| s).max().unwrap_or(0);
        a.max(b)
    }

    /// Time-invariant terms involve inputs only.
    pub fn is_time_invariant(&self) -> bool {
        self.state_order() == 0
    }

    /// Readable name, input lags counted from the current step (`u[t]` is the newest input).
    pub fn label(&self) -> String {
        let mut out = String::new();
        for &(d, e) in &self.input {
            if !out.is_empty() {
                out.push('*');
            }
            let lag = d - 1;
            let var = if lag == 0 {
                "u[t]".to_string()
            } else {
                format!("u[t-{lag}]")
            };
            match self.family {
                BasisFamily::Legendre => write!(out, "P{e}({var})").unwrap(),
                BasisFamily::Monomial if e == 1 => out.push_str(&var),
                BasisFamily::Monomial => write!(out, "{var}^{e}").unwrap(),
            }
        }
        for &(k, s, e) in &self.state {
            if !out.is_empty() {
                out.push('*');
            }
            write!(out, "x{}[t-{s}]", k + 1).unwrap();
            if e > 1 {
                write!(out, "^{e}").unwrap();
            }
        }
        out
    }
}

/// Variables of the expansion: input delays first, then state factors ordered by
/// (delay, feature).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Input(usize),
    State(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisCaps {
    pub max_degree: u32,
    pub max_input_delay: usize,
    pub max_state_delay: usize,
}

impl BasisCaps {
    /// Number of leading rows without full history: inputs reach back `L_u - 1`
    /// steps, states `L_x` steps.
    pub fn history(&self) -> usize {
        self.max_input_delay.saturating_sub(1).max(self.max_state_delay)
    }
}

fn variables(caps: &BasisCaps, rank: usize) -> Vec<Var> {
    let mut vars: Vec<Var> = (1..=caps.max_input_delay).map(Var::Input).collect();
    for s in 1..=caps.max_state_delay {
        vars.extend((0..rank).map(|k| Var::State(k, s)));
    }
    vars
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of terms `C(V + D, D) - 1` for `V` variables and degree cap `D`.
pub fn term_count(caps: &BasisCaps, rank: usize) -> u128 {
    let v = (caps.max_input_delay + rank * caps.max_state_delay) as u128;
    binomial(v + u128::from(caps.max_degree), u128::from(caps.max_degree)) - 1
}

/// All products of degree `1..=D` over the variables, ordered by
/// (degree, state order, max delay, sorted factor list).
pub fn enumerate_bases(
    caps: &BasisCaps,
    rank: usize,
    family: BasisFamily,
    term_cap: usize,
) -> Result<Vec<BasisTerm>> {
    if caps.max_degree == 0 || caps.max_input_delay == 0 {
        return Err(Error::InvalidParameter(
            "basis needs degree >= 1 and input delay >= 1".into(),
        ));
    }
    let count = term_count(caps, rank);
    if count > term_cap as u128 {
        return Err(Error::TooManyTerms {
            count,
            cap: term_cap,
        });
    }
    let vars = variables(caps, rank);
    let mut combos: Vec<Vec<usize>> = Vec::with_capacity(count as usize);
    let mut current = Vec::new();
    fn extend(
        start: usize,
        left: u32,
        nvars: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !current.is_empty() {
            out.push(current.clone());
        }
        if left == 0 {
            return;
        }
        for v in start..nvars {
            current.push(v);
            extend(v, left - 1, nvars, current, out);
            current.pop();
        }
    }
    extend(0, caps.max_degree, vars.len(), &mut current, &mut combos);

    let mut terms: Vec<(Vec<usize>, BasisTerm)> = combos
        .into_iter()
        .map(|c| {
            let term = term_from_factors(&c, &vars, family);
            (c, term)
        })
        .collect();
    terms.sort_by(|(ca, a), (cb, b)| {
        (a.degree(), a.state_order(), a.max_delay())
            .cmp(&(b.degree(), b.state_order(), b.max_delay()))
            .then_with(|| lex(ca, cb))
    });
    Ok(terms.into_iter().map(|(_, t)| t).collect())
}

fn lex(a: &[usize], b: &[usize]) -> Ordering {
    a.cmp(b)
}

fn term_from_factors(factors: &[usize], vars: &[Var], family: BasisFamily) -> BasisTerm {
    let mut input: Vec<(usize, u32)> = Vec::new();
    let mut state: Vec<(usize, usize, u32)> = Vec::new();
    for &f in factors {
        match vars[f] {
            Var::Input(d) => match input.last_mut() {
                Some((ld, e)) if *ld == d => *e += 1,
                _ => input.push((d, 1)),
            },
            Var::State(k, s) => match state.last_mut() {
                Some((lk, ls, e)) if *lk == k && *ls == s => *e += 1,
                _ => state.push((k, s, 1)),
            },
        }
    }
    BasisTerm {
        input,
        state,
        family,
    }
}

/// Evaluates basis terms on rows `history..T`.
///
/// Input factor `(d, n)` at row `t` is `P_n(u_{t-d+1})` (Legendre, after mapping the
/// declared range onto `[-1, 1]`) or `u_{t-d+1}^n`; state factor `(k, s, m)` is
/// `z_{k, t-s}^m` where `z` are the supplied normalized states.
pub struct BasisEvaluator<'a> {
    inputs: &'a [f64],
    states: Option<&'a DMatrix<f64>>,
    family: BasisFamily,
    range: InputRange,
    history: usize,
}

impl<'a> BasisEvaluator<'a> {
    pub fn new(
        inputs: &'a [f64],
        states: Option<&'a DMatrix<f64>>,
        family: BasisFamily,
        range: InputRange,
        history: usize,
    ) -> Result<Self> {
        range.validate()?;
        if family == BasisFamily::Legendre {
            let tol = 1e-12 * (range.hi - range.lo);
            if let Some((i, &v)) = inputs
                .iter()
                .enumerate()
                .find(|(_, &v)| !(v >= range.lo - tol && v <= range.hi + tol))
            {
                return Err(Error::InputOutOfRange {
                    index: i,
                    value: v,
                    lo: range.lo,
                    hi: range.hi,
                });
            }
        }
        if let Some(s) = states {
            if s.nrows() != inputs.len() {
                return Err(Error::LengthMismatch {
                    what: "states vs inputs",
                    left: s.nrows(),
                    right: inputs.len(),
                });
            }
        }
        if history >= inputs.len() {
            return Err(Error::InvalidParameter(format!(
                "history of {history} steps leaves no rows out of {}",
                inputs.len()
            )));
        }
        Ok(Self {
            inputs,
            states,
            family,
            range,
            history,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.inputs.len() - self.history
    }

    fn input_value(&self, u: f64, n: u32) -> f64 {
        match self.family {
            BasisFamily::Legendre => legendre(n, self.range.to_symmetric(u)),
            BasisFamily::Monomial => u.powi(n as i32),
        }
    }

    /// Column of `term`; `inputs` overrides the input sequence (used for surrogates).
    pub fn column_with(&self, term: &BasisTerm, inputs: &[f64]) -> Result<Vec<f64>> {
        let h = self.history;
        if term.max_delay() > 0 {
            let need_u = term.input.iter().map(|&(d, _)| d - 1).max().unwrap_or(0);
            let need_x = term.state.iter().map(|&(_, s, _)| s).max().unwrap_or(0);
            if need_u > h || need_x > h {
                return Err(Error::InvalidParameter(format!(
                    "term {} reaches beyond the {h}-step history",
                    term.label()
                )));
            }
        }
        let mut col = vec![1.0; self.n_rows()];
        for &(d, n) in &term.input {
            for (i, c) in col.iter_mut().enumerate() {
                *c *= self.input_value(inputs[h + i + 1 - d], n);
            }
        }
        if !term.state.is_empty() {
            let states = self.states.ok_or_else(|| {
                Error::InvalidParameter("state factor without state matrix".into())
            })?;
            for &(k, s, m) in &term.state {
                if k >= states.ncols() {
                    return Err(Error::InvalidParameter(format!(
                        "state feature {k} out of {} columns",
                        states.ncols()
                    )));
                }
                for (i, c) in col.iter_mut().enumerate() {
                    *c *= states[(h + i - s, k)].powi(m as i32);
                }
            }
        }
        Ok(col)
    }

    pub fn column(&self, term: &BasisTerm) -> Result<Vec<f64>> {
        self.column_with(term, self.inputs)
    }
}

/// Dense `T' x B` matrix of basis time series.
pub fn evaluate_bases(terms: &[BasisTerm], evaluator: &BasisEvaluator<'_>) -> Result<DMatrix<f64>> {
    let rows = evaluator.n_rows();
    let mut out = DMatrix::zeros(rows, terms.len());
    for (j, term) in terms.iter().enumerate() {
        let col = evaluator.column(term)?;
        out.column_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn caps(d: u32, lu: usize, lx: usize) -> BasisCaps {
        BasisCaps {
            max_degree: d,
            max_input_delay: lu,
            max_state_delay: lx,
        }
    }

    fn labels(terms: &[BasisTerm]) -> Vec<String> {
        terms.iter().map(BasisTerm::label).collect()
    }

    #[test]
    fn legendre_values() {
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_abs_diff_eq!(legendre(1, x), x);
            assert_abs_diff_eq!(legendre(2, x), 1.5 * x * x - 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(legendre(3, x), 2.5 * x * x * x - 1.5 * x, epsilon = 1e-15);
        }
        assert_eq!(legendre(2, 0.0), -0.5);
        assert_abs_diff_eq!(legendre(7, 1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn enumeration_examples() {
        let m = BasisFamily::Monomial;
        let t = enumerate_bases(&caps(1, 3, 0), 0, m, 100).unwrap();
        assert_eq!(labels(&t), ["u[t]", "u[t-1]", "u[t-2]"]);
        let t = enumerate_bases(&caps(2, 2, 0), 0, m, 100).unwrap();
        assert_eq!(
            labels(&t),
            ["u[t]", "u[t-1]", "u[t]^2", "u[t]*u[t-1]", "u[t-1]^2"]
        );
        let t = enumerate_bases(&caps(1, 1, 1), 2, m, 100).unwrap();
        assert_eq!(labels(&t), ["u[t]", "x1[t-1]", "x2[t-1]"]);
        assert!(t[1].state_order() == 1 && !t[1].is_time_invariant());
    }

    #[test]
    fn enumeration_count_and_cap() {
        let c = caps(3, 20, 2);
        assert_eq!(term_count(&c, 4), 4494);
        assert_eq!(enumerate_bases(&c, 4, BasisFamily::Legendre, 20_000).unwrap().len(), 4494);
        assert!(matches!(
            enumerate_bases(&c, 4, BasisFamily::Legendre, 1000),
            Err(Error::TooManyTerms { count: 4494, cap: 1000 })
        ));
    }

    #[test]
    fn evaluation_alignment() {
        let u: Vec<f64> = (0..10).map(|t| t as f64 / 10.0).collect();
        let ev = BasisEvaluator::new(&u, None, BasisFamily::Monomial, InputRange::UNIT, 2).unwrap();
        let t = enumerate_bases(&caps(1, 3, 0), 0, BasisFamily::Monomial, 10).unwrap();
        let m = evaluate_bases(&t, &ev).unwrap();
        assert_eq!(m.nrows(), 8);
        // Row 0 is time step 2: u[t] = 0.2, u[t-1] = 0.1, u[t-2] = 0.0.
        assert_abs_diff_eq!(m[(0, 0)], 0.2);
        assert_abs_diff_eq!(m[(0, 1)], 0.1);
        assert_abs_diff_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn legendre_range_checked() {
        let u = [0.5, 1.5];
        assert!(matches!(
            BasisEvaluator::new(&u, None, BasisFamily::Legendre, InputRange::UNIT, 0),
            Err(Error::InputOutOfRange { index: 1, .. })
        ));
        let c = [0.3; 6];
        let ev = BasisEvaluator::new(&c, None, BasisFamily::Legendre, InputRange::UNIT, 0).unwrap();
        let t = enumerate_bases(&caps(1, 1, 0), 0, BasisFamily::Legendre, 10).unwrap();
        let col = ev.column(&t[0]).unwrap();
        assert!(col.iter().all(|&v| v == col[0]));
    }
}
