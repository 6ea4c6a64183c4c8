//! Noise models for fibre-optic solitons in the nonlinear spectral domain.
//!
//! The crate covers the full pipeline for studying how distributed amplifier
//! noise corrupts the discrete (soliton) part of a signal's nonlinear
//! Fourier spectrum:
//!
//! * [`units`]: fibre parameters and soliton-unit normalization,
//! * [`waveform`]: time grids, closed-form solitons, Darboux synthesis,
//! * [`nft`]: Zakharov–Shabat scattering and eigenvalue search,
//! * [`ssfm`]: stochastic split-step propagation of the full field,
//! * [`perturb`]: reduced Ito SDEs for one soliton's four coordinates and
//!   the split/concatenated models of the spectral-amplitude channel,
//! * [`analytics`]: closed-form moments and variance decompositions,
//! * [`harness`]: reproducible Monte Carlo experiments that compare the
//!   closed forms against simulation.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod nft;
pub mod perturb;
pub mod ssfm;
pub mod units;
pub mod waveform;
