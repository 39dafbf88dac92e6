use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scband::{
    build_band, estimate_covariance, fit_mean, select_knots, BandConfig, BandResult, BasisFamily, SelectOptions,
};

use crate::args::{family, BandArgs};
use crate::error::Result;
use crate::ingest::{ingest_csv, DomainMap, IngestOptions};
use crate::manifest::{self, InputRef, Manifest};
use crate::plot::band_svg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRequest {
    pub input: PathBuf,
    pub ingest: IngestOptions,
    pub basis: BasisFamily,
    /// Fixed size; chosen by BIC when absent.
    pub knots: Option<usize>,
    pub select: SelectOptions,
    pub band: BandConfig,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub n_subjects: usize,
    pub total_obs: usize,
    pub mean_count: f64,
    pub domain: DomainMap,
    #[serde(rename = "J")]
    pub size: usize,
    #[serde(rename = "p")]
    pub order: Option<usize>,
    #[serde(rename = "K")]
    pub dim: usize,
    pub selected_by_bic: bool,
    pub qhat: f64,
    pub norm_sigma1: f64,
    pub norm_sigma2: f64,
}

pub type BandManifest = Manifest<BandRequest, BandSummary>;

#[derive(Debug)]
pub struct BandOutcome {
    pub manifest: BandManifest,
    pub band: BandResult,
    pub files: Vec<PathBuf>,
}

impl BandRequest {
    pub fn from_args(args: &BandArgs) -> Result<Self> {
        let input = args.data.input.clone().ok_or(scband::Error::InvalidConfig {
            field: "input",
            reason: "--input or --manifest is required".into(),
        })?;
        Ok(Self {
            input,
            ingest: args.data.ingest_options(),
            basis: family(args.basis.basis, args.basis.order),
            knots: args.knots,
            select: SelectOptions {
                range: args.basis.knot_range,
                penalize_dimension: args.basis.penalize_dimension,
            },
            band: BandConfig {
                alpha: args.alpha,
                replications: args.boot,
                grid_size: args.grid,
                seed: args.seed,
                parallel: true,
            },
            plot: args.plot,
        })
    }
}

pub fn run(args: &BandArgs) -> Result<BandOutcome> {
    let request = match &args.manifest {
        Some(path) => {
            let recorded: BandManifest = manifest::load(path, "band")?;
            if let Some(input) = &recorded.input {
                manifest::verify_input(&recorded.request.input, input)?;
            }
            recorded.request
        }
        None => BandRequest::from_args(args)?,
    };
    execute(&request, &args.output_dir)
}

/// Runs the full pipeline for `req` and writes the artifacts to `out`.
pub fn execute(req: &BandRequest, out: &Path) -> Result<BandOutcome> {
    req.band.validate()?;
    let input = InputRef::of(&req.input)?;
    let (data, domain) = ingest_csv(&req.input, &req.ingest)?;
    let (size, selected) = match req.knots {
        Some(j) => (j, false),
        None => (select_knots(&data, req.basis, req.select)?.chosen, true),
    };
    let spec = req.basis.with_size(size)?;
    let fit = fit_mean(&data, &spec)?;
    let cov = estimate_covariance(&fit, &data)?;
    let band = build_band(&fit, &cov, &req.band, &data)?;
    log::info!("K = {}, qhat = {}", spec.dim(), band.qhat);

    let summary = BandSummary {
        n_subjects: data.n_subjects(),
        total_obs: data.total(),
        mean_count: data.mean_count(),
        domain,
        size,
        order: spec.order(),
        dim: spec.dim(),
        selected_by_bic: selected,
        qhat: band.qhat,
        norm_sigma1: cov.norm_sigma1(),
        norm_sigma2: cov.norm_sigma2(),
    };
    let manifest = Manifest::new("band", req.clone(), Some(input), summary);

    manifest::ensure_dir(out)?;
    let mut files = Vec::new();
    let csv_path = out.join("band.csv");
    manifest::write(&csv_path, &band_csv(&band, &domain, &manifest))?;
    files.push(csv_path);
    let json_path = out.join("manifest.json");
    manifest::write(&json_path, &manifest.to_pretty())?;
    files.push(json_path);
    if req.plot {
        let title = format!(
            "{:.0}% simultaneous band, {} (K = {})",
            100.0 * (1.0 - req.band.alpha),
            req.basis.name(),
            spec.dim()
        );
        let svg_path = out.join("band.svg");
        manifest::write(&svg_path, &band_svg(
                &band,
                &data,
                &domain,
                [&title, &req.ingest.x_col, &req.ingest.y_col],
                &manifest.to_line(),
            ))?;
        files.push(svg_path);
    }
    Ok(BandOutcome { manifest, band, files })
}

fn band_csv(band: &BandResult, domain: &DomainMap, manifest: &BandManifest) -> String {
    let mut s = manifest.csv_header();
    s.push_str("x_raw,x_unit,mhat,lower,upper,scale\n");
    for m in 0..band.grid.len() {
        let u = band.grid[m];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            domain.to_raw(u),
            u,
            band.mhat[m],
            band.lower[m],
            band.upper[m],
            band.scale[m]
        );
    }
    s
}
