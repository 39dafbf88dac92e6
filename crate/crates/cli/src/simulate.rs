use std::fmt::Write;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use scband::{run_coverage, BandConfig, SimulationConfig, SimulationReport};

use crate::args::{family, SimulateArgs};
use crate::error::{CliError, Result};
use crate::manifest::{self, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub coverage: f64,
    pub successes: usize,
    pub failures: usize,
    pub mean_norm_sigma1: f64,
    pub mean_norm_sigma2: f64,
    pub mean_chosen: f64,
}

pub type SimulationManifest = Manifest<SimulationConfig, SimulationSummary>;

#[derive(Debug)]
pub struct SimulationOutcome {
    pub manifest: SimulationManifest,
    pub report: SimulationReport,
    pub files: Vec<PathBuf>,
}

pub fn config_from_args(args: &SimulateArgs) -> SimulationConfig {
    SimulationConfig {
        setting: args.setting,
        n: args.n,
        score_dist: args.score_dist,
        error_dist: args.error_dist,
        heteroscedastic: args.hetero,
        sigma_eps: args.sigma_eps,
        reps: args.reps,
        band: BandConfig {
            alpha: args.alpha,
            replications: args.boot,
            grid_size: args.grid,
            seed: args.seed,
            parallel: false,
        },
        seed: args.seed,
        basis: family(args.basis, args.order),
        eigen_scale: 1.0,
        parallel: true,
    }
}

pub fn run(args: &SimulateArgs) -> Result<SimulationOutcome> {
    let config = if let Some(path) = &args.manifest {
        manifest::load::<SimulationConfig, SimulationSummary>(path, "simulate")?.request
    } else if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest {
            path: path.clone(),
            message: format!("not a simulation config: {e}"),
        })?
    } else {
        config_from_args(args)
    };

    let report = run_coverage(&config)?;
    let summary = SimulationSummary {
        coverage: report.coverage,
        successes: report.successes,
        failures: report.failures,
        mean_norm_sigma1: report.mean_norm_sigma1,
        mean_norm_sigma2: report.mean_norm_sigma2,
        mean_chosen: report.mean_chosen,
    };
    let manifest = Manifest::new("simulate", config, None, summary);

    let out = &args.output_dir;
    manifest::ensure_dir(out)?;
    let reps_path = out.join("replications.csv");
    manifest::write(&reps_path, &replications_csv(&report, &manifest))?;
    let summary_path = out.join("summary.json");
    manifest::write(&summary_path, &manifest.to_pretty())?;
    Ok(SimulationOutcome {
        manifest,
        report,
        files: vec![reps_path, summary_path],
    })
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |v| v.to_string())
}

fn replications_csv(report: &SimulationReport, manifest: &SimulationManifest) -> String {
    let mut s = manifest.csv_header();
    s.push_str("rep,n_obs,chosen,qhat,covered,norm_sigma1,norm_sigma2,failure\n");
    for r in &report.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.rep,
            r.n_obs,
            opt(&r.chosen),
            opt(&r.qhat),
            opt(&r.covered),
            opt(&r.norm_sigma1),
            opt(&r.norm_sigma2),
            opt(&r.failure)
        );
    }
    s
}
