use nalgebra::DMatrix;

/// Relative norm below which a projected column counts as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-8;

/// Incremental modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Each candidate is first rescaled to RMS 1, so the drop test `||c|| < tol sqrt(T)`
/// compares the surviving fraction of the column against `tol`.
#[derive(Debug, Clone)]
pub struct Orthonormalizer {
    rows: usize,
    basis: Vec<f64>,
    count: usize,
    limit: usize,
}

impl Orthonormalizer {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            basis: Vec::new(),
            count: 0,
            limit: rows,
        }
    }

    /// Starts from the normalized constant vector, so retained columns are centered.
    pub fn centered(rows: usize) -> Self {
        let mut o = Self::new(rows);
        if rows > 0 {
            o.basis = vec![1.0 / (rows as f64).sqrt(); rows];
            o.count = 1;
        }
        o
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// True once the retained set spans the whole space.
    pub fn is_full(&self) -> bool {
        self.count >= self.limit
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.basis[i * self.rows..(i + 1) * self.rows]
    }

    /// Orthonormalizes `c` against everything retained so far; returns the index of the
    /// new basis vector or `None` if it was dependent.
    pub fn push(&mut self, mut c: Vec<f64>) -> Option<usize> {
        assert_eq!(c.len(), self.rows, "column length");
        if self.is_full() {
            return None;
        }
        let norm = dot(&c, &c).sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return None;
        }
        let scale = (self.rows as f64).sqrt() / norm;
        c.iter_mut().for_each(|v| *v *= scale);
        for _ in 0..2 {
            for i in 0..self.count {
                let q = &self.basis[i * self.rows..(i + 1) * self.rows];
                let h = dot(q, &c);
                axpy(-h, q, &mut c);
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm < DEPENDENCE_TOL * (self.rows as f64).sqrt() {
            return None;
        }
        let inv = 1.0 / norm;
        self.basis.extend(c.iter().map(|v| v * inv));
        self.count += 1;
        Some(self.count - 1)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums keep the loop vectorizable.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn inner(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}

/// Result of orthonormalizing a fixed column sequence.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    /// Unit-norm, mutually orthogonal columns, one per retained input column.
    pub xi: DMatrix<f64>,
    pub retained: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Sequential Gram-Schmidt over the columns of `basis` in order.
pub fn orthonormalize(basis: &DMatrix<f64>) -> Orthonormalized {
    let rows = basis.nrows();
    let mut o = Orthonormalizer::new(rows);
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..basis.ncols() {
        match o.push(basis.column(j).iter().copied().collect()) {
            Some(_) => retained.push(j),
            None => dropped.push(j),
        }
    }
    let xi = DMatrix::from_column_slice(rows, o.len(), &o.basis);
    Orthonormalized {
        xi,
        retained,
        dropped,
    }
}
