//! Synchronization analysis and simulation for networks of coupled
//! oscillators with per-node parameter mismatch.
//!
//! The crate is organized around the pipeline the CLI drives:
//!
//! * [`graph`] — undirected Laplacians, gain diagonals, and a symmetric
//!   Jacobi eigensolver.
//! * [`dynamics`] — node vector fields (nominal drift plus a mismatch
//!   basis), the shipped Lorenz model, and mismatch ensembles.
//! * [`certification`] — spectral stability certificates: the uniform
//!   margin program, the ultimate-error bound, and the gain conditions
//!   for the decentralized and distributed regimes.
//! * [`control`] — the control inputs and adaptive estimator rates for
//!   each regime.
//! * [`sim`] — the coupled network ODE, fixed-step RK4 integration, and
//!   error diagnostics.
//! * [`scenario`] — config-file schema, presets, and assembly of a
//!   runnable scenario.

pub mod certification;
pub mod control;
pub mod dynamics;
pub mod graph;
pub mod scenario;
pub mod sim;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("matrix is not symmetric: {0}")]
    Asymmetric(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("certificate condition failed: {0}")]
    CertificateFailed(String),
    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
