use thiserror::Error;

/// Errors raised by tree construction, the dynamics, and the numerical services.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed tree document: {0}")]
    MalformedTree(String),

    #[error("internal node at {path} has {found} children, expected exactly 2")]
    NotProperBinary { path: String, found: usize },

    #[error("duplicate option label `{0}`")]
    DuplicateLabel(String),

    #[error("a parsing needs at least two options, found {0}")]
    TooFewOptions(usize),

    #[error("unknown node index {0}")]
    UnknownNode(usize),

    #[error("node {0} is a leaf; flips act on internal nodes")]
    LeafFlip(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate branch at node {node}: z = {z:e} is below the invertibility threshold")]
    DegenerateBranch { node: usize, z: f64 },

    #[error("isomorphism does not act on this tree: {0}")]
    IsomorphismMismatch(String),

    #[error("group of 2^{n_internal} elements exceeds the enumeration cap 2^{cap}")]
    GroupTooLarge { n_internal: usize, cap: usize },

    #[error("non-finite state at t = {t}: {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("state left the simplex at t = {t} in block {block} (violation {violation:e})")]
    SimplexViolation { t: f64, block: usize, violation: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("eigenvalue computation failed for a {0}x{0} matrix")]
    Eigen(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation errors are caused by bad input; everything else is a numerical
    /// or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedTree(_)
                | Error::NotProperBinary { .. }
                | Error::DuplicateLabel(_)
                | Error::TooFewOptions(_)
                | Error::UnknownNode(_)
                | Error::LeafFlip(_)
                | Error::Dimension { .. }
                | Error::InvalidInput(_)
                | Error::IsomorphismMismatch(_)
                | Error::GroupTooLarge { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
