//! Dense density-matrix simulation.
//!
//! States are stored row-major as `2^n x 2^n` complex matrices. Qubit 0 is the
//! leftmost tensor factor, i.e. the most significant bit of a basis index, so
//! `Z_i = I ⊗ .. ⊗ Z ⊗ .. ⊗ I` has the Pauli at position `i`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest register the dense engine accepts (2^24 complex entries).
pub const MAX_QUBITS: usize = 12;

/// Square complex operator on a set of target qubits.
pub type Operator = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn check_qubits(n_qubits: usize) -> Result<()> {
    match n_qubits {
        0 => Err(Error::NoQubits),
        n if n > MAX_QUBITS => Err(Error::TooManyQubits(n)),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|0..0><0..0|`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = ONE;
        Ok(Self {
            n_qubits,
            dim,
            data,
        })
    }

    /// `|+><+|^{⊗n}`, the Hadamard transform of the all-zero state. Every entry is `2^-n`.
    pub fn plus_state(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        let value = Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self {
            n_qubits,
            dim,
            data: vec![value; dim * dim],
        })
    }

    /// Pure state `|psi><psi|` from (not necessarily normalized) amplitudes.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidParameter("zero amplitude vector".into()));
        }
        let mut data = vec![ZERO; dim * dim];
        for (r, ar) in amplitudes.iter().enumerate() {
            for (c, ac) in amplitudes.iter().enumerate() {
                data[r * dim + c] = ar * ac.conj() / norm;
            }
        }
        Ok(Self {
            n_qubits,
            dim,
            data,
        })
    }

    /// Builds a state from a row-major matrix, checking Hermiticity and unit trace to `1e-10`.
    pub fn from_row_major(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: data.len(),
            });
        }
        let rho = Self {
            n_qubits,
            dim,
            data,
        };
        let herm = rho.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (max deviation {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("trace {tr} is not 1")));
        }
        Ok(rho)
    }

    /// Tensor product `factors[0] ⊗ factors[1] ⊗ ...`.
    pub fn tensor(factors: &[DensityMatrix]) -> Result<Self> {
        let n_qubits: usize = factors.iter().map(|f| f.n_qubits).sum();
        check_qubits(n_qubits)?;
        let mut acc = vec![ONE];
        let mut acc_dim = 1usize;
        for f in factors {
            let new_dim = acc_dim * f.dim;
            let mut next = vec![ZERO; new_dim * new_dim];
            for r1 in 0..acc_dim {
                for c1 in 0..acc_dim {
                    let a = acc[r1 * acc_dim + c1];
                    if a == ZERO {
                        continue;
                    }
                    for r2 in 0..f.dim {
                        for c2 in 0..f.dim {
                            next[(r1 * f.dim + r2) * new_dim + c1 * f.dim + c2] =
                                a * f.data[r2 * f.dim + c2];
                        }
                    }
                }
            }
            acc = next;
            acc_dim = new_dim;
        }
        Ok(Self {
            n_qubits,
            dim: acc_dim,
            data: acc,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // Tr(rho rho) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho.
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Max entrywise `|rho - rho^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.data[r * self.dim + c] - self.data[c * self.dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.to_nalgebra())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Debug-path check of the state invariants: Hermitian and unit trace within
    /// `1e-10`, eigenvalues above `-1e-9`.
    pub fn check_physical(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "state is not Hermitian (max deviation {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state trace {tr} is not 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::InvalidParameter(format!(
                "state has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    fn check_index(&self, qubit: usize) -> Result<()> {
        if qubit < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            })
        }
    }

    /// `U rho U^dagger` with `U` the ordered product of `gates` (first gate applied first).
    pub fn apply_gates(&self, gates: &[GateSpec]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_gates_in_place(gates)?;
        Ok(out)
    }

    pub(crate) fn apply_gates_in_place(&mut self, gates: &[GateSpec]) -> Result<()> {
        for gate in gates {
            gate.validate(self.n_qubits)?;
        }
        for gate in gates {
            let (targets, op) = gate.compile();
            debug_assert!(unitarity_error(&op) <= 1e-12);
            self.conjugate_in_place(&targets, &op);
        }
        Ok(())
    }

    /// `sum_i K_i rho K_i^dagger` with the operators embedded on `targets` by identity padding.
    pub fn apply_kraus(&self, kraus: &[Operator], targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_kraus_in_place(kraus, targets)?;
        Ok(out)
    }

    pub(crate) fn apply_kraus_in_place(&mut self, kraus: &[Operator], targets: &[usize]) -> Result<()> {
        self.check_targets(targets)?;
        let expected = 1usize << targets.len();
        for k in kraus {
            if k.nrows() != expected || k.ncols() != expected {
                return Err(Error::OperatorDimension {
                    expected,
                    found: k.nrows().max(k.ncols()),
                });
            }
        }
        let deviation = completeness_error(kraus);
        if deviation > 1e-10 {
            return Err(Error::KrausCompleteness { deviation });
        }
        self.kraus_unchecked(kraus, targets);
        Ok(())
    }

    pub(crate) fn kraus_unchecked(&mut self, kraus: &[Operator], targets: &[usize]) {
        if let [single] = kraus {
            self.conjugate_in_place(targets, single);
            return;
        }
        let mut acc = vec![ZERO; self.data.len()];
        let mut term = self.data.clone();
        for k in kraus {
            term.copy_from_slice(&self.data);
            let layout = Layout::new(self.n_qubits, targets);
            layout.left(&mut term, self.dim, k);
            layout.right_adjoint(&mut term, self.dim, k);
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        self.data = acc;
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("empty target list".into()));
        }
        for (i, &t) in targets.iter().enumerate() {
            self.check_index(t)?;
            if targets[..i].contains(&t) {
                return Err(Error::InvalidParameter(format!("qubit {t} targeted twice")));
            }
        }
        Ok(())
    }

    fn conjugate_in_place(&mut self, targets: &[usize], op: &Operator) {
        let layout = Layout::new(self.n_qubits, targets);
        layout.left(&mut self.data, self.dim, op);
        layout.right_adjoint(&mut self.data, self.dim, op);
    }

    /// `Tr(rho Z_qubit)`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_index(qubit)?;
        let mask = 1usize << (self.n_qubits - 1 - qubit);
        let value = (0..self.dim)
            .map(|i| {
                let p = self.data[i * self.dim + i].re;
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum();
        Ok(value)
    }

    /// `<Z_i>` for every qubit, in qubit order.
    pub fn expect_z_all(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for i in 0..self.dim {
            let p = self.data[i * self.dim + i].re;
            for (q, o) in out.iter_mut().enumerate() {
                if i & (1 << (self.n_qubits - 1 - q)) == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }

    /// Reduced single-qubit state by partial trace over all other qubits.
    pub fn reduced_qubit(&self, qubit: usize) -> Result<DensityMatrix> {
        self.check_index(qubit)?;
        let mask = 1usize << (self.n_qubits - 1 - qubit);
        let mut red = [ZERO; 4];
        for i in 0..self.dim {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            red[0] += self.data[i * self.dim + i];
            red[1] += self.data[i * self.dim + j];
            red[2] += self.data[j * self.dim + i];
            red[3] += self.data[j * self.dim + j];
        }
        Ok(DensityMatrix {
            n_qubits: 1,
            dim: 2,
            data: red.to_vec(),
        })
    }

    /// Trace distance `(1/2) sum |eig(rho1 - rho2)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let diff = DMatrix::from_row_slice(self.dim, self.dim, &self.data)
            - DMatrix::from_row_slice(other.dim, other.dim, &other.data);
        let eig = hermitian_eigenvalues(diff);
        Ok(0.5 * eig.iter().map(|e| e.abs()).sum::<f64>())
    }
}

fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let herm = (&m + m.adjoint()).map(|z| z * 0.5);
    let mut eig: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Index bookkeeping for an operator on a subset of qubits.
struct Layout {
    /// Full-register offset of each local basis index.
    offsets: Vec<usize>,
    /// Bits occupied by the targets.
    mask: usize,
}

impl Layout {
    fn new(n_qubits: usize, targets: &[usize]) -> Self {
        let k = targets.len();
        let mut mask = 0;
        for &t in targets {
            mask |= 1 << (n_qubits - 1 - t);
        }
        let offsets = (0..1usize << k)
            .map(|local| {
                targets.iter().enumerate().fold(0, |acc, (i, &t)| {
                    if local & (1 << (k - 1 - i)) != 0 {
                        acc | (1 << (n_qubits - 1 - t))
                    } else {
                        acc
                    }
                })
            })
            .collect();
        Self { offsets, mask }
    }

    /// `data <- (op ⊗ I) data`.
    fn left(&self, data: &mut [Complex64], dim: usize, op: &Operator) {
        let d = self.offsets.len();
        let mut v = vec![ZERO; d];
        for base in (0..dim).filter(|b| b & self.mask == 0) {
            for col in 0..dim {
                for (a, off) in self.offsets.iter().enumerate() {
                    v[a] = data[(base + off) * dim + col];
                }
                for (a, off) in self.offsets.iter().enumerate() {
                    let mut s = ZERO;
                    for (b, vb) in v.iter().enumerate() {
                        s += op[(a, b)] * vb;
                    }
                    data[(base + off) * dim + col] = s;
                }
            }
        }
    }

    /// `data <- data (op ⊗ I)^dagger`.
    fn right_adjoint(&self, data: &mut [Complex64], dim: usize, op: &Operator) {
        let d = self.offsets.len();
        let mut v = vec![ZERO; d];
        for row in 0..dim {
            let r = &mut data[row * dim..(row + 1) * dim];
            for base in (0..dim).filter(|b| b & self.mask == 0) {
                for (a, off) in self.offsets.iter().enumerate() {
                    v[a] = r[base + off];
                }
                for (a, off) in self.offsets.iter().enumerate() {
                    let mut s = ZERO;
                    for (b, vb) in v.iter().enumerate() {
                        s += vb * op[(a, b)].conj();
                    }
                    r[base + off] = s;
                }
            }
        }
    }
}

/// Max entrywise `|sum K^dagger K - I|`.
pub fn completeness_error(kraus: &[Operator]) -> f64 {
    let Some(first) = kraus.first() else {
        return f64::INFINITY;
    };
    let d = first.nrows();
    let mut sum = Operator::zeros(d, d);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    (sum - Operator::identity(d, d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Max entrywise `|U^dagger U - I|`.
pub fn unitarity_error(u: &Operator) -> f64 {
    let d = u.nrows();
    (u.adjoint() * u - Operator::identity(d, d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn rx_matrix(theta: f64) -> Operator {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(theta / 2.0).sin());
    Operator::from_row_slice(2, 2, &[c, s, s, c])
}

pub fn rz_matrix(theta: f64) -> Operator {
    let half = theta / 2.0;
    Operator::from_row_slice(
        2,
        2,
        &[
            Complex64::from_polar(1.0, -half),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, half),
        ],
    )
}

pub fn hadamard_matrix() -> Operator {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Operator::from_row_slice(2, 2, &[h, h, h, -h])
}

pub fn pauli_x() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> Operator {
    let i = Complex64::new(0.0, 1.0);
    Operator::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> Operator {
    Operator::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `|0><0| ⊗ I + |1><1| ⊗ block`, control as the high local bit.
fn controlled(block: &Operator) -> Operator {
    let mut m = Operator::identity(4, 4);
    for r in 0..2 {
        for c in 0..2 {
            m[(2 + r, 2 + c)] = block[(r, c)];
        }
    }
    m
}

/// One gate of a circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateSpec {
    Rx { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    H { target: usize },
    Cnot { control: usize, target: usize },
    /// Controlled RX; the controlled block is the literal `RX(angle)` matrix.
    Crx {
        control: usize,
        target: usize,
        angle: f64,
    },
}

impl GateSpec {
    pub fn target(&self) -> usize {
        match *self {
            GateSpec::Rx { target, .. }
            | GateSpec::Rz { target, .. }
            | GateSpec::H { target }
            | GateSpec::Cnot { target, .. }
            | GateSpec::Crx { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            GateSpec::Cnot { control, .. } | GateSpec::Crx { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self.control() {
            Some(c) => vec![c, self.target()],
            None => vec![self.target()],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
        }
        if self.control() == Some(self.target()) {
            return Err(Error::ControlIsTarget(self.target()));
        }
        Ok(())
    }

    /// Returns `(targets, matrix)` with the matrix acting on the listed targets in order.
    pub fn compile(&self) -> (Vec<usize>, Operator) {
        match *self {
            GateSpec::Rx { target, angle } => (vec![target], rx_matrix(angle)),
            GateSpec::Rz { target, angle } => (vec![target], rz_matrix(angle)),
            GateSpec::H { target } => (vec![target], hadamard_matrix()),
            GateSpec::Cnot { control, target } => (vec![control, target], controlled(&pauli_x())),
            GateSpec::Crx {
                control,
                target,
                angle,
            } => (vec![control, target], controlled(&rx_matrix(angle))),
        }
    }

    /// Same gate with qubit indices shifted down by `offset`.
    pub(crate) fn shifted(&self, offset: usize) -> GateSpec {
        match *self {
            GateSpec::Rx { target, angle } => GateSpec::Rx {
                target: target - offset,
                angle,
            },
            GateSpec::Rz { target, angle } => GateSpec::Rz {
                target: target - offset,
                angle,
            },
            GateSpec::H { target } => GateSpec::H {
                target: target - offset,
            },
            GateSpec::Cnot { control, target } => GateSpec::Cnot {
                control: control - offset,
                target: target - offset,
            },
            GateSpec::Crx {
                control,
                target,
                angle,
            } => GateSpec::Crx {
                control: control - offset,
                target: target - offset,
                angle,
            },
        }
    }
}

/// Full `2^n x 2^n` unitary of an ordered gate list.
pub fn circuit_unitary(n_qubits: usize, gates: &[GateSpec]) -> Result<Operator> {
    check_qubits(n_qubits)?;
    let dim = 1usize << n_qubits;
    // Columns of U are U|j>; evolve each basis ket as a rank-one "density" column by column.
    let mut u = Operator::identity(dim, dim);
    for gate in gates {
        gate.validate(n_qubits)?;
        let (targets, op) = gate.compile();
        let layout = Layout::new(n_qubits, &targets);
        let mut rows: Vec<Complex64> = u.transpose().iter().copied().collect();
        // `rows` is U in row-major order; left-multiplying by the gate acts on row indices.
        layout.left(&mut rows, dim, &op);
        u = Operator::from_row_slice(dim, dim, &rows);
    }
    Ok(u)
}

/// `(1, r_x, r_y, r_z)` representation of a single-qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedBlochVector {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl ExtendedBlochVector {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Result<Self> {
        let norm2 = rx * rx + ry * ry + rz * rz;
        if norm2 > 1.0 + 1e-9 {
            return Err(Error::OutOfRange {
                name: "Bloch vector norm^2",
                value: norm2,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self { rx, ry, rz })
    }

    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        if rho.n_qubits != 1 {
            return Err(Error::DimensionMismatch {
                left: 2,
                right: rho.dim,
            });
        }
        let off = rho.get(0, 1);
        Ok(Self {
            rx: 2.0 * off.re,
            ry: -2.0 * off.im,
            rz: rho.get(0, 0).re - rho.get(1, 1).re,
        })
    }

    /// `rho = (I + r_x X + r_y Y + r_z Z) / 2`.
    pub fn to_state(&self) -> DensityMatrix {
        let data = vec![
            Complex64::new((1.0 + self.rz) / 2.0, 0.0),
            Complex64::new(self.rx / 2.0, -self.ry / 2.0),
            Complex64::new(self.rx / 2.0, self.ry / 2.0),
            Complex64::new((1.0 - self.rz) / 2.0, 0.0),
        ];
        DensityMatrix {
            n_qubits: 1,
            dim: 2,
            data,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [1.0, self.rx, self.ry, self.rz]
    }
}

/// Haar-random pure single-qubit state.
pub fn haar_random_qubit<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let mut amp = [ZERO; 2];
    for a in &mut amp {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *a = Complex64::new(re, im);
    }
    DensityMatrix::from_pure(&amp).expect("gaussian amplitudes are nonzero almost surely")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn one_state() -> DensityMatrix {
        DensityMatrix::from_pure(&[ZERO, ONE]).unwrap()
    }

    #[test]
    fn plus_state_entries() {
        let rho = DensityMatrix::plus_state(1).unwrap();
        for z in rho.as_slice() {
            assert_abs_diff_eq!(z.re, 0.5, epsilon = 1e-15);
        }
        let rho = DensityMatrix::plus_state(2).unwrap();
        assert!(rho.as_slice().iter().all(|z| (z.re - 0.25).abs() < 1e-15 && z.im == 0.0));
        let rho = DensityMatrix::plus_state(3).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn plus_state_limits() {
        assert!(matches!(DensityMatrix::plus_state(13), Err(Error::TooManyQubits(13))));
        assert!(matches!(DensityMatrix::plus_state(0), Err(Error::NoQubits)));
    }

    #[test]
    fn rx_pi_flips_ground_state() {
        let rho = DensityMatrix::zero_state(1).unwrap();
        let out = rho.apply_gates(&[GateSpec::Rx { target: 0, angle: PI }]).unwrap();
        assert!(out.trace_distance(&one_state()).unwrap() < 1e-12);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let rho = DensityMatrix::plus_state(2).unwrap();
        assert_eq!(rho.apply_gates(&[]).unwrap(), rho);
    }

    #[test]
    fn cnot_makes_bell_state() {
        let rho = DensityMatrix::tensor(&[
            DensityMatrix::plus_state(1).unwrap(),
            DensityMatrix::zero_state(1).unwrap(),
        ])
        .unwrap();
        let bell = rho
            .apply_gates(&[GateSpec::Cnot {
                control: 0,
                target: 1,
            }])
            .unwrap();
        let h = 0.5;
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_abs_diff_eq!(bell.get(r, c).re, h, epsilon = 1e-14);
        }
        let reduced = bell.reduced_qubit(0).unwrap();
        assert_abs_diff_eq!(reduced.purity(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(bell.expect_z(0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bell.expect_z(1).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn invalid_gates_rejected() {
        let rho = DensityMatrix::plus_state(2).unwrap();
        assert!(matches!(
            rho.apply_gates(&[GateSpec::H { target: 2 }]),
            Err(Error::QubitIndex { index: 2, .. })
        ));
        assert!(matches!(
            rho.apply_gates(&[GateSpec::Cnot {
                control: 1,
                target: 1
            }]),
            Err(Error::ControlIsTarget(1))
        ));
    }

    #[test]
    fn expect_z_basics() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        assert_eq!(zero.expect_z(0).unwrap(), 1.0);
        let plus = DensityMatrix::plus_state(1).unwrap();
        assert_abs_diff_eq!(plus.expect_z(0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(plus.expect_z(1).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let plus = DensityMatrix::plus_state(1).unwrap();
        assert_abs_diff_eq!(zero.trace_distance(&zero).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(zero.trace_distance(&one_state()).unwrap(), 1.0, epsilon = 1e-14);
        // rho0 - rho+ = [[1/2, -1/2], [-1/2, -1/2]] has eigenvalues ±1/sqrt(2).
        assert_abs_diff_eq!(
            zero.trace_distance(&plus).unwrap(),
            FRAC_1_SQRT_2,
            epsilon = 1e-14
        );
        let two = DensityMatrix::zero_state(2).unwrap();
        assert!(matches!(
            zero.trace_distance(&two),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kraus_identity_and_completeness() {
        let rho = DensityMatrix::plus_state(2).unwrap();
        let id = vec![Operator::identity(2, 2)];
        assert_eq!(rho.apply_kraus(&id, &[1]).unwrap(), rho);
        let bad = vec![Operator::identity(2, 2).map(|z| z * 0.9)];
        match rho.apply_kraus(&bad, &[0]) {
            Err(Error::KrausCompleteness { deviation }) => {
                assert_abs_diff_eq!(deviation, 0.19, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        let wrong_dim = vec![Operator::identity(4, 4)];
        assert!(rho.apply_kraus(&wrong_dim, &[0]).is_err());
    }

    #[test]
    fn compiled_gates_are_unitary() {
        let gates = [
            GateSpec::Rx { target: 0, angle: 0.37 },
            GateSpec::Rz { target: 0, angle: -1.2 },
            GateSpec::H { target: 0 },
            GateSpec::Cnot { control: 0, target: 1 },
            GateSpec::Crx { control: 1, target: 0, angle: 2.9 },
        ];
        for g in gates {
            assert!(unitarity_error(&g.compile().1) <= 1e-12, "{g:?}");
        }
    }

    #[test]
    fn circuit_unitary_matches_density_evolution() {
        let gates = [
            GateSpec::H { target: 0 },
            GateSpec::Rx { target: 2, angle: 0.3 },
            GateSpec::Cnot { control: 0, target: 2 },
            GateSpec::Crx { control: 2, target: 1, angle: 1.1 },
        ];
        let u = circuit_unitary(3, &gates).unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        let rho = DensityMatrix::zero_state(3).unwrap();
        let evolved = rho.apply_gates(&gates).unwrap();
        let col: Vec<Complex64> = u.column(0).iter().copied().collect();
        let direct = DensityMatrix::from_pure(&col).unwrap();
        assert!(evolved.trace_distance(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let b = ExtendedBlochVector::new(0.3, -0.4, 0.5).unwrap();
        let back = ExtendedBlochVector::from_state(&b.to_state()).unwrap();
        assert_abs_diff_eq!(back.rx, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(back.ry, -0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(back.rz, 0.5, epsilon = 1e-15);
        assert!(ExtendedBlochVector::new(1.0, 1.0, 0.0).is_err());
    }
}
