//! Command-line front end for `scband`: CSV ingestion, band construction,
//! knot selection and simulation studies.

pub mod args;
pub mod band;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod plot;
pub mod select;
pub mod simulate;

pub use args::{Cli, Command};
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, DomainMap, IngestOptions};

/// Runs a parsed command and returns the text to print on success.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Band(a) => {
            let out = band::run(a)?;
            let r = &out.manifest.result;
            let mut s = format!(
                "J = {}, K = {}, qhat = {:.4}, |S1| = {:.4}, |S2| = {:.4}\n",
                r.size, r.dim, r.qhat, r.norm_sigma1, r.norm_sigma2
            );
            for f in &out.files {
                s.push_str(&format!("wrote {}\n", f.display()));
            }
            Ok(s)
        }
        Command::Select(a) => Ok(select::run(a)?.1),
        Command::Simulate(a) => {
            let out = simulate::run(a)?;
            let r = &out.manifest.result;
            let mut s = format!(
                "coverage = {:.4} ({} ok, {} failed), mean |S1| = {:.4}, mean |S2| = {:.4}, mean J = {:.2}\n",
                r.coverage, r.successes, r.failures, r.mean_norm_sigma1, r.mean_norm_sigma2, r.mean_chosen
            );
            for f in &out.files {
                s.push_str(&format!("wrote {}\n", f.display()));
            }
            Ok(s)
        }
    }
}
