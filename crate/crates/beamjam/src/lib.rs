//! Simulation library for beamspace massive MIMO uplink beam training under
//! random pilot jamming.
//!
//! The library covers the full pipeline:
//!
//! * [`numerics`] — dense complex Hermitian kernels (eigendecomposition, PSD
//!   square roots, positive-definite solves, Kronecker products) and
//!   correlated complex Gaussian sampling;
//! * [`channel`] — exponential spatial correlation, DFT codebooks, combined
//!   transceiver beam maps, and beam-domain covariance statistics;
//! * [`signal`] — orthogonal pilot books, random jamming pilots, and the
//!   per-pilot projected training observations (with an antenna-level
//!   reference path for validation);
//! * [`detection`] — the locally most powerful test for jamming, its
//!   chi-square-mixture performance theory, threshold calibration, and a
//!   modified GLRT baseline;
//! * [`estimation`] — two-step MMSE estimation of the jamming-pilot
//!   inner-products (norms, phase differences, weighted `|α₁|`) and of the
//!   jammer/user channels, plus quality metrics;
//! * [`experiments`] — scenario configuration, seeded parallel Monte Carlo
//!   orchestration, figure presets, and CSV emission.

pub mod channel;
pub mod detection;
pub mod estimation;
pub mod experiments;
pub mod numerics;
pub mod signal;

/// Centralized numerical tolerances used across modules and tests.
pub mod tol {
    /// Relative Hermiticity tolerance: `‖A − Aᴴ‖_F ≤ HERMITICITY_REL·‖A‖_F`.
    pub const HERMITICITY_REL: f64 = 1e-10;
    /// Relative floor below which eigenvalues count as zero (rank cutoffs,
    /// PSD clamping): `λ` is zero when `λ < EIG_CLAMP_REL·λ_max`.
    pub const EIG_CLAMP_REL: f64 = 1e-10;
    /// Relative reconstruction error allowed for factorizations
    /// (`VΛVᴴ`, `S·S`): `‖err‖_F ≤ RECONSTRUCTION_REL·‖A‖_F`.
    pub const RECONSTRUCTION_REL: f64 = 1e-8;
    /// Relative residual allowed for positive-definite solves.
    pub const SOLVE_RESIDUAL_REL: f64 = 1e-8;
    /// Starting jitter (scaled by `tr(A)/n`) for near-singular solves.
    pub const JITTER_START: f64 = 1e-12;
    /// Number of times the jitter is doubled before giving up.
    pub const JITTER_DOUBLINGS: u32 = 6;
    /// Absolute tolerance on `|P_FA(γ) − target|` for threshold calibration.
    pub const THRESHOLD_PFA_TOL: f64 = 1e-6;
    /// Series-coefficient mass defect `|Σ a_m − 1|` that triggers adaptive
    /// truncation growth before renormalization.
    pub const SERIES_MASS_TOL: f64 = 1e-9;
}

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix violates the Hermitian contract.
    #[error("matrix is not Hermitian: ‖A − Aᴴ‖_F = {deviation:.3e} exceeds {allowed:.3e}")]
    NotHermitian { deviation: f64, allowed: f64 },
    /// Input matrix has an eigenvalue below the PSD clamp floor.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },
    /// A positive-definite solve failed even after maximal jitter.
    #[error("linear system is singular after maximal jitter")]
    Singular,
    /// Operands have incompatible shapes.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A scalar parameter is outside its validated range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An iterative routine failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A structural precondition failed (rank, emptiness, …).
    #[error("{0}")]
    Unsupported(String),
    /// Configuration document could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    /// Output could not be written.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    /// A failure inside a Monte Carlo sweep, tagged with the sweep point so
    /// the offending parameter combination is visible at the top level.
    #[error("{context}: {source}")]
    AtSweepPoint {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
