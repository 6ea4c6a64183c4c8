//! Error type shared by every module in the crate.

use num_complex::Complex64;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received a value outside its domain.
    InvalidParam { field: &'static str, message: String },
    /// A config file or CLI argument could not be interpreted.
    Config { message: String },
    /// Underlying I/O failure, message carries the OS detail.
    Io { message: String },
    /// Signal samples at the grid edge are too large for scattering
    /// integrals to have converged to their asymptotic form.
    GridTooNarrow { edge_magnitude: f64, threshold: f64 },
    /// Two requested eigenvalues coincide within the dedup radius.
    DuplicateEigenvalue { zeta: Complex64 },
    /// Transfer-matrix product left the representable range.
    ScatteringOverflow { lambda: Complex64 },
    /// Newton iteration failed to converge; carries the last iterate.
    RootRefinementFailed { last_iterate: Complex64, residual: f64 },
    /// Eigenvalue search found a different number of roots than requested.
    SpectrumCountMismatch { expected: usize, found: Vec<Complex64> },
    /// Output-field eigenvalues could not be matched one-to-one with the
    /// input spectrum (a root was lost, created, or merged).
    EigenvalueTracking { message: String },
    /// Field samples became non-finite during split-step propagation.
    Blowup { step: usize },
    /// The SDE state left the soliton regime (beta reached zero).
    SolitonCollapse { z: f64 },
    /// A path lacks a recorded track that the requested model needs.
    MissingTrack { track: &'static str },
    /// A requested statistic name is not in the registry.
    StatisticUnknown { name: String },
    /// Too many Monte Carlo trials errored for the run to be trusted.
    TrialFailures { failed: usize, total: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParam { field, message } => {
                write!(f, "invalid parameter `{field}`: {message}")
            }
            Error::Config { message } => write!(f, "config error: {message}"),
            Error::Io { message } => write!(f, "io error: {message}"),
            Error::GridTooNarrow { edge_magnitude, threshold } => write!(
                f,
                "grid too narrow: edge magnitude {edge_magnitude:.3e} exceeds {threshold:.3e}"
            ),
            Error::DuplicateEigenvalue { zeta } => {
                write!(f, "duplicate eigenvalue at {zeta}")
            }
            Error::ScatteringOverflow { lambda } => {
                write!(f, "scattering overflow at lambda = {lambda}")
            }
            Error::RootRefinementFailed { last_iterate, residual } => write!(
                f,
                "root refinement failed: last iterate {last_iterate}, |a| = {residual:.3e}"
            ),
            Error::SpectrumCountMismatch { expected, found } => write!(
                f,
                "spectrum count mismatch: expected {expected}, found {} at {:?}",
                found.len(),
                found
            ),
            Error::EigenvalueTracking { message } => {
                write!(f, "eigenvalue lost or created: {message}")
            }
            Error::Blowup { step } => {
                write!(f, "field blow-up detected at split step {step}")
            }
            Error::SolitonCollapse { z } => {
                write!(f, "soliton collapse in SDE at z = {z:.6}")
            }
            Error::MissingTrack { track } => {
                write!(f, "path is missing the `{track}` track required by this model")
            }
            Error::StatisticUnknown { name } => {
                write!(f, "statistic `{name}` is not registered")
            }
            Error::TrialFailures { failed, total } => {
                write!(f, "{failed} of {total} trials failed")
            }
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io { message: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
