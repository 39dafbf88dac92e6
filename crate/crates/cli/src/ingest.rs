//! Long-format CSV ingestion: one observation per row, grouped by subject.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use scband::ObservationSet;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub x_col: String,
    pub y_col: String,
    pub id_col: String,
    /// Design domain on the raw scale; the observed range when absent.
    pub domain: Option<(f64, f64)>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            x_col: "x".into(),
            y_col: "y".into(),
            id_col: "id".into(),
            domain: None,
        }
    }
}

/// Affine map between the raw design scale and `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    pub raw_min: f64,
    pub raw_max: f64,
}

impl DomainMap {
    pub fn new(raw_min: f64, raw_max: f64) -> Result<Self> {
        if !(raw_min.is_finite() && raw_max.is_finite()) {
            return Err(CliError::BadDomain {
                lo: raw_min,
                hi: raw_max,
                reason: "endpoints must be finite".into(),
            });
        }
        if raw_min >= raw_max {
            return Err(CliError::BadDomain {
                lo: raw_min,
                hi: raw_max,
                reason: "lower endpoint must be below the upper".into(),
            });
        }
        Ok(Self { raw_min, raw_max })
    }

    pub fn width(&self) -> f64 {
        self.raw_max - self.raw_min
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        ((x - self.raw_min) / self.width()).clamp(0.0, 1.0)
    }

    pub fn to_raw(&self, u: f64) -> f64 {
        self.raw_min + u * self.width()
    }
}

/// Parses `lo,hi`.
pub fn parse_domain(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim()));
    Ok((num(lo)?, num(hi)?))
}

fn parse_value(path: &Path, row: usize, column: &str, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        row: Some(row),
        message: format!("row {row}: column `{column}` is not a number: `{field}`"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            row: Some(row),
            message: format!("row {row}: column `{column}` is not finite: `{field}`"),
        });
    }
    Ok(v)
}

/// Reads a long-format CSV with a header row.
///
/// Rows are grouped by the id column, subjects in order of first
/// appearance and observations in file order. Design points are mapped to
/// `[0, 1]` through the returned [`DomainMap`].
pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<(ObservationSet, DomainMap)> {
    let path = path.as_ref();
    let parse_err = |row: Option<usize>, message: String| CliError::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(None, format!("cannot read: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(None, format!("cannot read header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(None, format!("missing column `{name}` (header: {})", headers.iter().collect::<Vec<_>>().join(","))))
    };
    let (xi, yi, ii) = (column(&opts.x_col)?, column(&opts.y_col)?, column(&opts.id_col)?);
    let fixed = opts.domain.map(|(lo, hi)| DomainMap::new(lo, hi)).transpose()?;

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut subjects: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| parse_err(Some(row), format!("row {row}: {e}")))?;
        let get = |i: usize| record.get(i).ok_or_else(|| parse_err(Some(row), format!("row {row}: missing field")));
        let x = parse_value(path, row, &opts.x_col, get(xi)?)?;
        let y = parse_value(path, row, &opts.y_col, get(yi)?)?;
        if let Some(d) = fixed {
            if x < d.raw_min || x > d.raw_max {
                return Err(CliError::Domain {
                    path: path.to_path_buf(),
                    row,
                    x,
                    lo: d.raw_min,
                    hi: d.raw_max,
                });
            }
        }
        let id = get(ii)?;
        let s = *index.entry(id.to_string()).or_insert_with(|| {
            subjects.push((Vec::new(), Vec::new()));
            subjects.len() - 1
        });
        subjects[s].0.push(x);
        subjects[s].1.push(y);
    }
    if subjects.is_empty() {
        return Err(CliError::EmptyDataset {
            path: path.to_path_buf(),
        });
    }

    let domain = match fixed {
        Some(d) => d,
        None => {
            let xs = subjects.iter().flat_map(|s| s.0.iter().copied());
            let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if lo == hi {
                return Err(CliError::BadDomain {
                    lo,
                    hi,
                    reason: "all design points coincide; pass --domain".into(),
                });
            }
            DomainMap::new(lo, hi)?
        }
    };
    for s in &mut subjects {
        for x in &mut s.0 {
            *x = domain.to_unit(*x);
        }
    }
    let data = ObservationSet::from_subjects(subjects)?;
    Ok((data, domain))
}
