use std::fmt::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use scband::{select_knots, BasisFamily, SelectOptions, SelectionResult};

use crate::args::{family, SelectArgs};
use crate::error::Result;
use crate::ingest::{ingest_csv, IngestOptions};
use crate::manifest::{self, InputRef, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectRequest {
    pub input: PathBuf,
    pub ingest: IngestOptions,
    pub basis: BasisFamily,
    pub select: SelectOptions,
}

pub type SelectManifest = Manifest<SelectRequest, SelectionResult>;

pub fn run(args: &SelectArgs) -> Result<(SelectManifest, String)> {
    let input = args.data.input.clone().ok_or(scband::Error::InvalidConfig {
        field: "input",
        reason: "--input is required".into(),
    })?;
    let req = SelectRequest {
        input,
        ingest: args.data.ingest_options(),
        basis: family(args.basis.basis, args.basis.order),
        select: SelectOptions {
            range: args.basis.knot_range,
            penalize_dimension: args.basis.penalize_dimension,
        },
    };
    let input_ref = InputRef::of(&req.input)?;
    let (data, _) = ingest_csv(&req.input, &req.ingest)?;
    let result = select_knots(&data, req.basis, req.select)?;
    let table = render(&result, data.total(), req.select.range.is_some());
    let manifest = Manifest::new("select", req, Some(input_ref), result);
    if let Some(dir) = &args.output_dir {
        manifest::ensure_dir(dir)?;
        manifest::write(&dir.join("selection.json"), &manifest.to_pretty())?;
    }
    Ok((manifest, table))
}

/// Text table of candidates followed by the chosen size.
pub fn render(result: &SelectionResult, total: usize, overridden: bool) -> String {
    let mut s = String::new();
    let (lo, hi) = result.range;
    let origin = if overridden {
        "user range".to_string()
    } else {
        format!("from nN = {total}")
    };
    let _ = writeln!(s, "candidates J = {lo}..={hi} ({origin})");
    let _ = writeln!(s, "{:>4}  {:>14}  status", "J", "BIC");
    for c in &result.candidates {
        let bic = c.bic.map_or_else(|| "-".to_string(), |b| format!("{b:.8}"));
        let mark = if c.size == result.chosen { "  *" } else { "" };
        let _ = writeln!(s, "{:>4}  {:>14}  {}{}", c.size, bic, c.status.as_str(), mark);
    }
    let _ = writeln!(s, "chosen J = {}", result.chosen);
    s
}
