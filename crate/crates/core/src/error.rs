use thiserror::Error;

use crate::noise::NoiseKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} qubits exceeds the dense simulation limit of {max}", max = crate::qsim::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("a register needs at least one qubit")]
    NoQubits,

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("gate control and target coincide on qubit {0}")]
    ControlIsTarget(usize),

    #[error("operator dimension {found} does not match {expected} for the given targets")]
    OperatorDimension { expected: usize, found: usize },

    #[error("Kraus set violates completeness: max |sum K^dag K - I| = {deviation:.3e}")]
    KrausCompleteness { deviation: f64 },

    #[error("compiled gate is not unitary: max |U^dag U - I| = {deviation:.3e}")]
    NonUnitary { deviation: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{name} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("the input unitary pairs qubits and needs an even count, got {0}")]
    OddQubits(usize),

    #[error("noise kind {0:?} is listed more than once")]
    DuplicateNoise(NoiseKind),

    #[error("a {hop}-hop entangler needs at least {} qubits, got {n_qubits}", hop + 1)]
    TooFewQubitsForHop { hop: usize, n_qubits: usize },

    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("range {start}..{end} is invalid for length {len}")]
    InvalidRange { start: usize, end: usize, len: usize },

    #[error("target has zero variance over the requested range")]
    ZeroVariance,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("basis enumeration would produce {count} terms, above the cap of {cap}")]
    TooManyTerms { count: u128, cap: usize },

    #[error("input {value} at index {index} lies outside the declared range [{lo}, {hi}]")]
    InputOutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}
