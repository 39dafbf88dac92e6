//! Simultaneous confidence band from the Gaussian multiplier process.
//!
//! Each replication `b` draws `Z_b = Σ̂^{1/2} W_b` with `W_b` standard normal
//! and records `S_b = max_x |Bᵀ(x) Z_b| / ‖Σ̂^{1/2} B(x)‖₂` over a uniform grid
//! of midpoints. The band is `m̂(x) ± Q̂ ‖Σ̂^{1/2} B(x)‖₂ / √n` where `Q̂` is
//! the `⌈(1−α)B⌉`-th order statistic of the `S_b`.
//!
//! Replication `b` uses ChaCha8 seeded with `seed` on stream `b`, so results
//! do not depend on how replications are scheduled across threads.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceStructure, SCALE_FLOOR};
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::fit::MeanFit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// Miscoverage level.
    pub alpha: f64,
    /// Multiplier replications `B`.
    pub replications: usize,
    /// Evaluation grid size `M`.
    pub grid_size: usize,
    pub seed: u64,
    /// Run replications on the rayon pool. Results are identical either way.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            replications: 500,
            grid_size: 1000,
            seed: 0,
            parallel: true,
        }
    }
}

impl BandConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: format!("must lie in (0, 1), got {}", self.alpha),
            });
        }
        if self.replications < 100 {
            return Err(Error::InvalidConfig {
                field: "replications",
                reason: format!("at least 100 required, got {}", self.replications),
            });
        }
        if self.grid_size < 50 {
            return Err(Error::InvalidConfig {
                field: "grid_size",
                reason: format!("at least 50 required, got {}", self.grid_size),
            });
        }
        Ok(())
    }

    /// Uniform midpoint grid `(m − 0.5) / M`, `m = 1..=M`.
    pub fn grid(&self) -> Vec<f64> {
        midpoint_grid(self.grid_size)
    }
}

pub fn midpoint_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|m| (m as f64 - 0.5) / size as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub grid: Vec<f64>,
    pub mhat: Vec<f64>,
    /// `‖Σ̂^{1/2} B(x)‖₂`; NaN where degenerate.
    pub scale: Vec<f64>,
    pub qhat: f64,
    /// NaN where the scale is degenerate.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub n_subjects: usize,
}

impl BandResult {
    /// Grid points where the band is defined.
    pub fn defined(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(|&m| self.scale[m].is_finite())
    }

    pub fn half_width(&self, m: usize) -> f64 {
        self.qhat * self.scale[m] / (self.n_subjects as f64).sqrt()
    }
}

/// Basis blocks and scales on the evaluation grid.
struct GridBasis {
    starts: Vec<usize>,
    values: Vec<f64>,
    width: usize,
    scale: Vec<Option<f64>>,
}

impl GridBasis {
    fn new(fit: &MeanFit, cov: &CovarianceStructure, grid: &[f64]) -> Result<Self> {
        let spec = fit.spec();
        if spec.dim() != cov.dim() {
            return Err(Error::InvalidData(format!(
                "fit has {} basis functions but covariance is {}x{}",
                spec.dim(),
                cov.dim(),
                cov.dim()
            )));
        }
        let width = spec.support_width();
        let mut starts = Vec::with_capacity(grid.len());
        let mut values = vec![0.0; grid.len() * width];
        let mut scale = Vec::with_capacity(grid.len());
        let mut degenerate = 0;
        for (m, &x) in grid.iter().enumerate() {
            let local = &mut values[m * width..(m + 1) * width];
            let start = spec.eval_local(x, local)?;
            let s = cov.scale_local(start, local);
            starts.push(start);
            if s < SCALE_FLOOR {
                degenerate += 1;
                scale.push(None);
            } else {
                scale.push(Some(s));
            }
        }
        if degenerate == grid.len() {
            return Err(Error::AllDegenerate);
        }
        if degenerate > 0 {
            log::warn!("{degenerate} of {} grid points have a degenerate scale; band undefined there", grid.len());
        }
        Ok(Self {
            starts,
            values,
            width,
            scale,
        })
    }

    fn sup(&self, z: &DVector<f64>) -> f64 {
        let mut best = 0.0_f64;
        for (m, s) in self.scale.iter().enumerate() {
            let Some(s) = s else { continue };
            let block = &self.values[m * self.width..(m + 1) * self.width];
            let start = self.starts[m];
            let v: f64 = block.iter().enumerate().map(|(a, b)| b * z[start + a]).sum();
            best = best.max(v.abs() / s);
        }
        best
    }
}

/// Standard normal vector `W_b` of length `dim` for replication `b`.
pub fn standard_draw(seed: u64, b: usize, dim: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)))
}

/// Multiplier vector `Z_b = Σ̂^{1/2} W_b` for replication `b`.
pub fn multiplier_draw(cov: &CovarianceStructure, seed: u64, b: usize) -> DVector<f64> {
    cov.sqrt_sigma() * standard_draw(seed, b, cov.dim())
}

/// The `B` simulated suprema `S_b`, in replication order.
pub fn sup_statistics(fit: &MeanFit, cov: &CovarianceStructure, cfg: &BandConfig) -> Result<Vec<f64>> {
    let grid = GridBasis::new(fit, cov, &cfg.grid())?;
    Ok(replicate(&grid, cov, cfg))
}

fn replicate(grid: &GridBasis, cov: &CovarianceStructure, cfg: &BandConfig) -> Vec<f64> {
    let one = |b: usize| grid.sup(&multiplier_draw(cov, cfg.seed, b));
    if cfg.parallel {
        (0..cfg.replications).into_par_iter().map(one).collect()
    } else {
        (0..cfg.replications).map(one).collect()
    }
}

/// Inverse-ECDF upper quantile: the `⌈(1−α)B⌉`-th order statistic.
pub fn upper_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    // guard against (1 − α)B landing a hair above an integer
    let rank = (((1.0 - alpha) * b as f64) - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, b) - 1]
}

/// Simulated `Q̂_{1−α}` of the sup-norm of the multiplier process.
pub fn simulate_quantile(fit: &MeanFit, cov: &CovarianceStructure, cfg: &BandConfig) -> Result<f64> {
    cfg.validate()?;
    let stats = sup_statistics(fit, cov, cfg)?;
    Ok(upper_quantile(&stats, cfg.alpha))
}

/// Assembles the band on the configured grid.
pub fn build_band(
    fit: &MeanFit,
    cov: &CovarianceStructure,
    cfg: &BandConfig,
    data: &ObservationSet,
) -> Result<BandResult> {
    cfg.validate()?;
    let grid_pts = cfg.grid();
    let grid = GridBasis::new(fit, cov, &grid_pts)?;
    let qhat = upper_quantile(&replicate(&grid, cov, cfg), cfg.alpha);
    let root_n = (data.n_subjects() as f64).sqrt();

    let mut mhat = Vec::with_capacity(grid_pts.len());
    let mut scale = Vec::with_capacity(grid_pts.len());
    let mut lower = Vec::with_capacity(grid_pts.len());
    let mut upper = Vec::with_capacity(grid_pts.len());
    for (m, s) in grid.scale.iter().enumerate() {
        let block = &grid.values[m * grid.width..(m + 1) * grid.width];
        let start = grid.starts[m];
        let mh: f64 = block.iter().enumerate().map(|(a, b)| b * fit.theta()[start + a]).sum();
        mhat.push(mh);
        match s {
            Some(s) => {
                let half = qhat * s / root_n;
                scale.push(*s);
                lower.push(mh - half);
                upper.push(mh + half);
            }
            None => {
                scale.push(f64::NAN);
                lower.push(f64::NAN);
                upper.push(f64::NAN);
            }
        }
    }
    Ok(BandResult {
        grid: grid_pts,
        mhat,
        scale,
        qhat,
        lower,
        upper,
        alpha: cfg.alpha,
        replications: cfg.replications,
        seed: cfg.seed,
        n_subjects: data.n_subjects(),
    })
}

/// Whether `f` lies inside the band at every grid point where it is defined.
pub fn covers(band: &BandResult, f: impl Fn(f64) -> f64) -> bool {
    band.defined().all(|m| {
        let v = f(band.grid[m]);
        band.lower[m] <= v && v <= band.upper[m]
    })
}
