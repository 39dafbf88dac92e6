use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("design point {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("invalid basis specification: {0}")]
    InvalidBasis(String),

    #[error("invalid observation set: {0}")]
    InvalidData(String),

    #[error(
        "design matrix is singular: Cholesky pivot {pivot:e} below {threshold:e} \
         (too many basis functions, K = {dim}, for the observed design points)"
    )]
    DesignSingular {
        dim: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("matrix is not positive semi-definite: eigenvalue {min_eigenvalue:e} below floor {floor:e}")]
    NotPsd { min_eigenvalue: f64, floor: f64 },

    #[error("covariance annihilates the basis at x = {x}: band is undefined there")]
    DegenerateScale { x: f64 },

    #[error("every grid point has a degenerate scale; no band can be formed")]
    AllDegenerate,

    #[error("no candidate in J = {jmin}..={jmax} could be fitted")]
    NoFeasibleKnots { jmin: usize, jmax: usize },

    #[error("sampling setting {setting} has an empty support for n = {n}")]
    EmptySupport { setting: u8, n: usize },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "DomainError",
            Error::InvalidBasis(_) => "InvalidBasis",
            Error::InvalidData(_) => "InvalidData",
            Error::DesignSingular { .. } => "DesignSingular",
            Error::NotPsd { .. } => "NotPSD",
            Error::DegenerateScale { .. } => "DegenerateScale",
            Error::AllDegenerate => "AllDegenerate",
            Error::NoFeasibleKnots { .. } => "NoFeasibleKnots",
            Error::EmptySupport { .. } => "EmptySupport",
            Error::InvalidConfig { .. } => "InvalidConfig",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
