//! Simulation and analysis toolkit for quantum noise-induced reservoir computing.
//!
//! The crate is split along the pipeline:
//!
//! * [`qsim`] dense density-matrix engine (gates, Kraus channels, Pauli-Z readout),
//! * [`noise`] the ten-channel noise library and its per-step compilation,
//! * [`reservoir`] input-driven dynamics (QNR and ESN), readout training, NARMA2 and
//!   echo-state probing,
//! * [`tipc`] temporal information processing capacity analysis.
//!
//! Every stochastic component draws from [`rng`] streams keyed by a master seed, so a
//! run is a pure function of its configuration.

pub mod error;
pub mod noise;
pub mod qsim;
pub mod reservoir;
pub mod rng;
pub mod tipc;

pub use error::{Error, Result};
