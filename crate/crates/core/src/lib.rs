//! Mean-function estimation and simultaneous confidence bands for
//! functional data observed at discrete, noisy points, from sparse to dense
//! sampling.
//!
//! The pipeline is
//!
//! 1. [`select_knots`]: choose the basis size by BIC;
//! 2. [`fit_mean`]: pooled least squares over all subjects;
//! 3. [`estimate_covariance`]: plug-in `Σ̂ = Σ̂₁ + Σ̂₂`;
//! 4. [`build_band`]: Gaussian multiplier quantile and band.
//!
//! ```
//! use scband::{build_band, estimate_covariance, fit_mean, BandConfig, BasisSpec, ObservationSet};
//!
//! let data = ObservationSet::from_subjects((0..40).map(|i| {
//!     let x: Vec<f64> = (0..5).map(|j| ((i * 5 + j) as f64 * 0.618).fract()).collect();
//!     let y = x.iter().map(|x| x.sin() + 0.01 * (i % 3) as f64).collect();
//!     (x, y)
//! }))?;
//! let fit = fit_mean(&data, &BasisSpec::cubic(3))?;
//! let cov = estimate_covariance(&fit, &data)?;
//! let band = build_band(&fit, &cov, &BandConfig::default(), &data)?;
//! assert!(band.qhat > 0.0);
//! # Ok::<(), scband::Error>(())
//! ```

pub mod accumulate;
pub mod band;
pub mod basis;
pub mod covariance;
pub mod data;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod select;
pub mod simulate;

pub use band::{build_band, covers, simulate_quantile, BandConfig, BandResult};
pub use basis::{
    eval_basis, eval_bspline, eval_fourier, eval_legendre, make_knot_grid, BasisFamily, BasisSpec,
    BasisVector, KnotGrid,
};
pub use covariance::{estimate_covariance, op_inf_norm, pointwise_scale, psd_sqrt, CovarianceStructure};
pub use data::ObservationSet;
pub use error::{Error, Result};
pub use fit::{fit_mean, predict, residuals, MeanFit};
pub use select::{bic, knot_range, select_knots, SelectOptions, SelectionResult};
pub use simulate::{
    gen_dataset, run_coverage, sample_counts, true_mean, ScoreDistribution, SimulationConfig,
    SimulationReport,
};
