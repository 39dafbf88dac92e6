//! Run manifests: the request that produced an artifact plus a summary of
//! the result. Every artifact carries its manifest, and a run can be
//! repeated from any of them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Marker prefixing the manifest line embedded in CSV artifacts.
pub const CSV_MARKER: &str = "# scband-manifest: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<R, S> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub request: R,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputRef>,
    pub result: S,
}

impl<R: Serialize, S: Serialize> Manifest<R, S> {
    pub fn new(command: &str, request: R, input: Option<InputRef>, result: S) -> Self {
        Self {
            tool: "scband".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            request,
            input,
            result,
        }
    }

    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// Comment line for the head of a CSV artifact.
    pub fn csv_header(&self) -> String {
        format!("{CSV_MARKER}{}\n", self.to_line())
    }
}

/// Size and FNV-1a digest of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub bytes: u64,
    pub fnv1a64: String,
}

impl InputRef {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            row: None,
            message: format!("cannot read: {e}"),
        })?;
        Ok(Self::of_bytes(&bytes))
    }

    pub fn of_bytes(bytes: &[u8]) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self {
            bytes: bytes.len() as u64,
            fnv1a64: format!("{h:016x}"),
        }
    }
}

/// Loads the manifest from a JSON manifest file or from the marker line of
/// a CSV artifact.
pub fn load<R: DeserializeOwned, S: DeserializeOwned>(path: &Path, command: &str) -> Result<Manifest<R, S>> {
    let err = |message: String| CliError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(format!("cannot read: {e}")))?;
    let json = match text.lines().find_map(|l| l.strip_prefix(CSV_MARKER)) {
        Some(line) => line.to_string(),
        None => text,
    };
    let value: serde_json::Value = serde_json::from_str(&json).map_err(|e| err(format!("not a manifest: {e}")))?;
    match value.get("command").and_then(|c| c.as_str()) {
        Some(c) if c == command => {}
        Some(c) => return Err(err(format!("manifest is for `{c}`, not `{command}`"))),
        None => return Err(err("missing `command`".into())),
    }
    serde_json::from_value(value).map_err(|e| err(format!("malformed manifest: {e}")))
}

/// Fails unless `path` still has the recorded size and digest.
pub fn verify_input(path: &Path, expected: &InputRef) -> Result<()> {
    let actual = InputRef::of(path)?;
    if &actual != expected {
        return Err(CliError::Manifest {
            path: PathBuf::from(path),
            message: format!(
                "input changed since the recorded run (recorded {} bytes / {}, found {} bytes / {})",
                expected.bytes, expected.fnv1a64, actual.bytes, actual.fnv1a64
            ),
        });
    }
    Ok(())
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(InputRef::of_bytes(b"").fnv1a64, "cbf29ce484222325");
        assert_eq!(InputRef::of_bytes(b"a").fnv1a64, "af63dc4c8601ec8c");
        assert_eq!(InputRef::of_bytes(b"foobar").fnv1a64, "85944171f73967e8");
    }

    #[test]
    fn round_trip_through_csv_line() {
        let m = Manifest::new("band", vec![1u32, 2], Some(InputRef::of_bytes(b"xyz")), 0.25f64);
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("m.json");
        let csv = dir.path().join("m.csv");
        fs::write(&json, m.to_pretty()).unwrap();
        fs::write(&csv, format!("{}a,b\n1,2\n", m.csv_header())).unwrap();
        let a: Manifest<Vec<u32>, f64> = load(&json, "band").unwrap();
        let b: Manifest<Vec<u32>, f64> = load(&csv, "band").unwrap();
        assert_eq!(a, m);
        assert_eq!(b, m);
        assert!(matches!(load::<Vec<u32>, f64>(&json, "simulate"), Err(CliError::Manifest { .. })));
    }
}
