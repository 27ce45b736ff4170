use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter outside the family's domain: {0}")]
    ParameterDomain(String),

    #[error("density undefined on the boundary of the unit square at ({u}, {v})")]
    Boundary { u: f64, v: f64 },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("design matrix error: {0}")]
    Design(String),

    #[error("value outside the supported domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("component {component} degenerated (effective weight {weight:.3} < {threshold})")]
    DegenerateComponent {
        component: usize,
        weight: f64,
        threshold: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
