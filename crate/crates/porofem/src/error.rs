//! Error type shared across the solver library.

use thiserror::Error;

/// Errors produced by mesh construction, assembly, linear algebra, time
/// stepping, and the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mesh request could not be satisfied.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// A point lies outside the meshed domain.
    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutsideDomain(f64, f64),

    /// A quadrature rule of the requested polynomial degree is not available.
    #[error("no triangle quadrature rule of degree {0} (supported: 1..=6)")]
    UnsupportedQuadrature(usize),

    /// Matrix factorization hit a zero (or numerically vanishing) pivot.
    #[error("singular matrix: zero pivot at elimination step {step}")]
    SingularMatrix { step: usize },

    /// A direct solve finished but the residual check failed.
    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    SolveTolerance { residual: f64, tolerance: f64 },

    /// Two Dirichlet constraints disagree on the same degree of freedom.
    #[error("conflicting Dirichlet values at dof {dof}: {first} vs {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },

    /// An eigenvalue iteration failed to converge.
    #[error("eigenvalue iteration did not converge within {0} iterations")]
    EigenNoConvergence(usize),

    /// A run configuration file is malformed.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// A run configuration is self-consistent but describes an unsupported run.
    #[error("invalid run setup: {0}")]
    InvalidRun(String),

    /// Forwarded I/O failure (report files, VTK snapshots, config files).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
