use thiserror::Error;

/// Every failure the engine can report. Each variant carries a stable
/// machine-readable code, see [`OwqcError::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OwqcError {
    #[error("singular block `{block}` (reciprocal condition {rcond:.3e})")]
    SingularBlock { block: String, rcond: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("orthogonal freedom is not orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partition layout does not fit this computation class: {0}")]
    LayoutMismatch(String),

    #[error("degenerate angles: {0}")]
    DegenerateAngles(String),

    #[error("A12 is singular (reciprocal condition {0:.3e}); inputs cannot be routed to outputs")]
    SingularA12(f64),

    #[error("three-node denominator d = {0:.3e} vanishes")]
    DegenerateD(f64),

    #[error("Euler decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("no closed-form four-node branch covers phi1 = {phi1}, r = {r} for configuration {config_id}")]
    OutOfBranch { config_id: u8, phi1: f64, r: f64 },

    #[error("measured quadrature has non-positive variance {0:.3e}")]
    DegenerateVariance(f64),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl OwqcError {
    /// Stable identifier used in machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            OwqcError::SingularBlock { .. } => "singular_block",
            OwqcError::DimensionMismatch(_) => "dimension_mismatch",
            OwqcError::NotPositiveDefinite(_) => "not_positive_definite",
            OwqcError::InvalidWeight(_) => "invalid_weight",
            OwqcError::InvalidGraph(_) => "invalid_graph",
            OwqcError::NotOrthogonal(_) => "not_orthogonal",
            OwqcError::InvalidPartition(_) => "invalid_partition",
            OwqcError::LayoutMismatch(_) => "layout_mismatch",
            OwqcError::DegenerateAngles(_) => "degenerate_angles",
            OwqcError::SingularA12(_) => "singular_a12",
            OwqcError::DegenerateD(_) => "degenerate_d",
            OwqcError::DecompositionFailure(_) => "decomposition_failure",
            OwqcError::OutOfBranch { .. } => "out_of_branch",
            OwqcError::DegenerateVariance(_) => "degenerate_variance",
            OwqcError::TooLarge(_) => "too_large",
            OwqcError::Parse(_) => "parse_error",
        }
    }
}

impl From<serde_json::Error> for OwqcError {
    fn from(e: serde_json::Error) -> Self {
        OwqcError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, OwqcError>;
