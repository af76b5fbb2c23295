use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("direction (u, v) must not be (0, 0)")]
    ZeroDirection,
    #[error("leading coefficient of univariate polynomial is zero")]
    DegenerateLeadingCoefficient,
    #[error("form has non-real coefficients (max |Im| = {0:e})")]
    NotReal(f64),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("coefficient of t^d is zero; the form cannot be normalized")]
    LeadingCoefficientZero,
    #[error("exponent ({0}, {1}, {2}) does not sum to degree {3}")]
    BadExponent(u32, u32, u32, usize),
    #[error("invalid linear form set: {0}")]
    InvalidLinearForms(String),
    #[error("fixed endpoint of degree {0} failed the strict hyperbolicity certificate")]
    EndpointNotStrict(usize),
    #[error("node set for coefficient recovery is ill-conditioned (estimate {0:e})")]
    IllConditionedNodes(f64),
    #[error("polynomial restricted to direction (-1, 0) has non-real roots (max |Im| = {0:e})")]
    NonRealRoots(f64),
    #[error("could not build a well-conditioned dual basis after {0} attempts")]
    BasisConditioningFailed(usize),
    #[error("Jacobian is numerically singular (pivot ratio {0:e})")]
    SingularJacobian(f64),
    #[error("polynomial is not hyperbolic (max normalized |Im| = {0:e})")]
    NotHyperbolic(f64),
    #[error("could not sample a strictly hyperbolic start system")]
    StartNotStrict,
    #[error("D has (nearly) repeated diagonal entries (gap {0:e})")]
    DegenerateD(f64),
    #[error("conic has a repeated root along (-1, 0)")]
    RepeatedD,
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("path tracking failed: {0}")]
    TrackFailed(String),
    #[error("solve failed after {attempts} attempts: {}", diagnostics.join("; "))]
    SolveFailed {
        attempts: usize,
        diagnostics: Vec<String>,
    },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("input polynomial is not homogeneous")]
    InhomogeneousInput,
    #[error("malformed input: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
