use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based data row (the header is row 0).
        row: Option<usize>,
        message: String,
    },

    #[error("{path}: no observations")]
    EmptyDataset { path: PathBuf },

    #[error("{path}: row {row}: x = {x} lies outside the domain [{lo}, {hi}]")]
    Domain {
        path: PathBuf,
        row: usize,
        x: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid domain [{lo}, {hi}]: {reason}")]
    BadDomain { lo: f64, hi: f64, reason: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] scband::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::EmptyDataset { .. } => "EmptyDataset",
            CliError::Domain { .. } | CliError::BadDomain { .. } => "DomainError",
            CliError::Io { .. } => "IoError",
            CliError::Manifest { .. } => "ManifestError",
            CliError::Core(e) => e.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Machine-readable description printed on failure.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            CliError::Parse { row: Some(row), .. } | CliError::Domain { row, .. } => {
                v["row"] = json!(row);
            }
            CliError::Core(scband::Error::InvalidConfig { field, .. }) => {
                v["field"] = json!(field);
            }
            CliError::Core(scband::Error::NoFeasibleKnots { jmin, jmax }) => {
                v["range"] = json!([jmin, jmax]);
                v["hint"] = json!(
                    "no candidate size could be fitted; pass a smaller --knot-range, a lower --order, \
                     or check that the design points are not concentrated on a few values"
                );
            }
            CliError::Core(scband::Error::DesignSingular { dim, .. }) => {
                v["dim"] = json!(dim);
                v["hint"] = json!("reduce --knots or --order");
            }
            _ => {}
        }
        json!({ "error": v })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
