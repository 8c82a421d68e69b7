//! Error types shared across the library.

use thiserror::Error;

/// Unified error type for configuration, validation, and computation failures.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Configuration document failed to parse.
    #[error("configuration parse error: {0}")]
    ConfigParse(String),

    /// A configuration value violates its schema constraint.
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    /// A `--set section.key=value` override could not be applied.
    #[error("invalid override '{key}': {reason}")]
    OverrideInvalid { key: String, reason: String },

    /// The integrator step is too large for the fastest system timescale.
    #[error(
        "integrator step dt = {dt} ps is too large: dt × max rate = {product:.3} \
         exceeds the stability budget {budget} (fastest scale {max_rate:.3} rad/ps)"
    )]
    StepTooLarge {
        dt: f64,
        max_rate: f64,
        product: f64,
        budget: f64,
    },

    /// A component key outside the propagated set was requested.
    #[error("invalid component key: {0}")]
    InvalidComponent(String),

    /// The phase grid is too coarse to resolve the requested signature.
    #[error(
        "phase grid with {n_phi} points per pulse aliases signatures up to \
         |v| = {max_abs_v}; need at least {required} points"
    )]
    PhaseGridTooCoarse {
        n_phi: usize,
        max_abs_v: i32,
        required: usize,
    },

    /// Trajectory data is unusable for the requested transform.
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    /// The two polariton eigenmodes coincide; LP/UP labels are undefined.
    #[error("degenerate polariton modes: eigenvalue splitting {splitting:.3e} below resolvable threshold")]
    DegeneratePolaritons { splitting: f64 },

    /// A numerical result failed a built-in validation check.
    #[error("numerical validation failed: {0}")]
    ValidationFailed(String),

    /// Spectrum assembly was asked to do something dimensionally impossible.
    #[error("invalid spectrum operation: {0}")]
    InvalidSpectrum(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
