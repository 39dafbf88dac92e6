//! Synthetic functional data and Monte Carlo coverage studies.
//!
//! Curves follow `Y_ij = m(X_ij) + Σ_{k≤4} √λ_k ξ_ik ψ_k(X_ij) + σ(X_ij) ε_ij`
//! with `m(x) = 1.5 sin(3π(x + 0.5)) + 2x³`, `λ_k = 2^{1−k}`,
//! `ψ_{2k−1} = √2 sin(2kπx)`, `ψ_{2k} = √2 cos(2kπx)` and `X_ij ~ U(0, 1)`.
//! Per-subject counts `N_i` come from one of four sampling settings ranging
//! from sparse to dense.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{build_band, covers, BandConfig};
use crate::basis::BasisFamily;
use crate::covariance::estimate_covariance;
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::fit::fit_mean;
use crate::select::{select_knots, SelectOptions};

/// Number of nonzero eigenvalues in the generating process.
pub const N_COMPONENTS: usize = 4;

/// Unit-variance, zero-mean distributions for scores and errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreDistribution {
    Normal,
    /// `U(−√3, √3)`.
    Uniform,
    /// Laplace with density `2^{-1/2} exp(−√2 |x|)`.
    Laplace,
}

impl ScoreDistribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ScoreDistribution::Normal => StandardNormal.sample(rng),
            ScoreDistribution::Uniform => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
            ScoreDistribution::Laplace => {
                // inverse CDF with scale 1/√2
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln() / SQRT_2
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreDistribution::Normal => "normal",
            ScoreDistribution::Uniform => "uniform",
            ScoreDistribution::Laplace => "laplace",
        }
    }
}

impl std::str::FromStr for ScoreDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(ScoreDistribution::Normal),
            "uniform" => Ok(ScoreDistribution::Uniform),
            "laplace" => Ok(ScoreDistribution::Laplace),
            other => Err(Error::InvalidConfig {
                field: "distribution",
                reason: format!("unknown distribution `{other}` (normal, uniform, laplace)"),
            }),
        }
    }
}

/// `m(x) = 1.5 sin(3π(x + 0.5)) + 2x³`.
pub fn true_mean(x: f64) -> f64 {
    1.5 * (3.0 * PI * (x + 0.5)).sin() + 2.0 * x.powi(3)
}

/// Eigenvalue `λ_k`, `k ≥ 1`.
pub fn eigenvalue(k: usize) -> f64 {
    if (1..=N_COMPONENTS).contains(&k) {
        2f64.powi(1 - k as i32)
    } else {
        0.0
    }
}

/// Eigenfunction `ψ_k`, `k ≥ 1`.
pub fn eigenfunction(k: usize, x: f64) -> f64 {
    let freq = 2.0 * PI * k.div_ceil(2) as f64 * x;
    if k % 2 == 1 {
        SQRT_2 * freq.sin()
    } else {
        SQRT_2 * freq.cos()
    }
}

/// Noise standard deviation `σ(x)`.
pub fn noise_sd(x: f64, sigma_eps: f64, heteroscedastic: bool) -> f64 {
    if heteroscedastic {
        let e = (-x).exp();
        1.2 * sigma_eps * (5.0 - e) / (5.0 + e)
    } else {
        sigma_eps
    }
}

/// `Var(Y | X = x) = Σ λ_k ψ_k(x)² + σ(x)²` under unit-variance scores.
pub fn response_variance(x: f64, sigma_eps: f64, heteroscedastic: bool) -> f64 {
    let curve: f64 = (1..=N_COMPONENTS).map(|k| eigenvalue(k) * eigenfunction(k, x).powi(2)).sum();
    curve + noise_sd(x, sigma_eps, heteroscedastic).powi(2)
}

/// Inclusive support of `N_i` for a sampling setting.
pub fn count_support(setting: u8, n: usize) -> Result<(usize, usize)> {
    let nf = n as f64;
    let (lo, hi) = match setting {
        1 => (3, 6),
        2 => ((2.0 * nf.powf(0.2)).floor() as usize, (4.0 * nf.powf(0.2)).floor() as usize),
        3 => {
            let r = (nf.sqrt()).floor() as usize;
            let r = if (r + 1) * (r + 1) <= n { r + 1 } else { r };
            let r2 = (2.0 * nf.sqrt()).floor() as usize;
            let r2 = if (r2 + 1) * (r2 + 1) <= 4 * n { r2 + 1 } else { r2 };
            (r, r2)
        }
        4 => (n / 4, n / 2),
        _ => {
            return Err(Error::InvalidConfig {
                field: "setting",
                reason: format!("must be 1, 2, 3 or 4, got {setting}"),
            })
        }
    };
    if lo == 0 || lo > hi {
        return Err(Error::EmptySupport { setting, n });
    }
    Ok((lo, hi))
}

/// I.i.d. discrete-uniform draws of `N_i` for `n` subjects.
pub fn sample_counts<R: Rng + ?Sized>(setting: u8, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let (lo, hi) = count_support(setting, n)?;
    Ok((0..n).map(|_| rng.random_range(lo..=hi)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Sampling setting, 1 (sparse) to 4 (dense).
    pub setting: u8,
    pub n: usize,
    pub score_dist: ScoreDistribution,
    pub error_dist: ScoreDistribution,
    pub heteroscedastic: bool,
    pub sigma_eps: f64,
    pub reps: usize,
    pub band: BandConfig,
    pub seed: u64,
    #[serde(default)]
    pub basis: BasisFamily,
    /// Multiplies every eigenvalue; 0 removes the random curve component.
    #[serde(default = "one")]
    pub eigen_scale: f64,
    /// Run replications on the rayon pool. Results are identical either way.
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            setting: 1,
            n: 100,
            score_dist: ScoreDistribution::Normal,
            error_dist: ScoreDistribution::Normal,
            heteroscedastic: false,
            sigma_eps: 0.1,
            reps: 500,
            band: BandConfig::default(),
            seed: 0,
            basis: BasisFamily::default(),
            eigen_scale: 1.0,
            parallel: true,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.setting) {
            return Err(Error::InvalidConfig {
                field: "setting",
                reason: format!("must be 1, 2, 3 or 4, got {}", self.setting),
            });
        }
        if self.n < 10 {
            return Err(Error::InvalidConfig {
                field: "n",
                reason: format!("at least 10 subjects required, got {}", self.n),
            });
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig {
                field: "reps",
                reason: "at least one replication required".into(),
            });
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "sigma_eps",
                reason: format!("must be finite and non-negative, got {}", self.sigma_eps),
            });
        }
        if !(self.eigen_scale >= 0.0 && self.eigen_scale.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "eigen_scale",
                reason: format!("must be finite and non-negative, got {}", self.eigen_scale),
            });
        }
        self.band.validate()?;
        count_support(self.setting, self.n)?;
        Ok(())
    }

    fn rep_rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }

    /// Multiplier seed used by replication `rep`.
    pub fn band_seed(&self, rep: usize) -> u64 {
        splitmix64(self.band.seed ^ splitmix64(rep as u64 ^ 0xA076_1D64_78BD_642F))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws replication `rep` of the configured design. Returns the data and
/// the mean function that generated it.
pub fn gen_dataset(cfg: &SimulationConfig, rep: usize) -> Result<(ObservationSet, fn(f64) -> f64)> {
    count_support(cfg.setting, cfg.n)?;
    let mut rng = cfg.rep_rng(rep);
    let counts = sample_counts(cfg.setting, cfg.n, &mut rng)?;
    let roots: Vec<f64> = (1..=N_COMPONENTS)
        .map(|k| (cfg.eigen_scale * eigenvalue(k)).sqrt())
        .collect();
    let mut subjects = Vec::with_capacity(cfg.n);
    for &count in &counts {
        let scores: Vec<f64> = (0..N_COMPONENTS).map(|_| cfg.score_dist.sample(&mut rng)).collect();
        let mut xs = Vec::with_capacity(count);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let x: f64 = rng.random();
            let eps = cfg.error_dist.sample(&mut rng);
            let curve: f64 = (0..N_COMPONENTS)
                .map(|k| roots[k] * scores[k] * eigenfunction(k + 1, x))
                .sum();
            xs.push(x);
            ys.push(true_mean(x) + curve + noise_sd(x, cfg.sigma_eps, cfg.heteroscedastic) * eps);
        }
        subjects.push((xs, ys));
    }
    Ok((ObservationSet::from_subjects(subjects)?, true_mean))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub n_obs: usize,
    pub chosen: Option<usize>,
    pub qhat: Option<f64>,
    pub covered: Option<bool>,
    pub norm_sigma1: Option<f64>,
    pub norm_sigma2: Option<f64>,
    /// Error kind when the replication failed.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    /// Fraction of successful replications whose band covers `m`.
    pub coverage: f64,
    pub successes: usize,
    pub failures: usize,
    pub mean_norm_sigma1: f64,
    pub mean_norm_sigma2: f64,
    pub mean_chosen: f64,
    pub records: Vec<RepRecord>,
}

/// Runs one replication end to end.
pub fn run_replication(cfg: &SimulationConfig, rep: usize) -> Result<RepRecord> {
    let (data, mean) = gen_dataset(cfg, rep)?;
    let sel = select_knots(&data, cfg.basis, SelectOptions::default())?;
    let spec = cfg.basis.with_size(sel.chosen)?;
    let fit = fit_mean(&data, &spec)?;
    let cov = estimate_covariance(&fit, &data)?;
    let band_cfg = BandConfig {
        seed: cfg.band_seed(rep),
        ..cfg.band
    };
    let band = build_band(&fit, &cov, &band_cfg, &data)?;
    Ok(RepRecord {
        rep,
        n_obs: data.total(),
        chosen: Some(sel.chosen),
        qhat: Some(band.qhat),
        covered: Some(covers(&band, mean)),
        norm_sigma1: Some(cov.norm_sigma1()),
        norm_sigma2: Some(cov.norm_sigma2()),
        failure: None,
    })
}

/// Monte Carlo coverage study.
///
/// Replications that fail (for instance with no fittable candidate size)
/// are recorded and left out of the coverage denominator and the norm
/// averages.
pub fn run_coverage(cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let one = |rep: usize| match run_replication(cfg, rep) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("replication {rep} failed: {e}");
            RepRecord {
                rep,
                n_obs: 0,
                chosen: None,
                qhat: None,
                covered: None,
                norm_sigma1: None,
                norm_sigma2: None,
                failure: Some(e.kind().to_string()),
            }
        }
    };
    let records: Vec<RepRecord> = if cfg.parallel {
        (0..cfg.reps).into_par_iter().map(one).collect()
    } else {
        (0..cfg.reps).map(one).collect()
    };
    Ok(summarize(*cfg, records))
}

fn summarize(config: SimulationConfig, records: Vec<RepRecord>) -> SimulationReport {
    let ok: Vec<&RepRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let successes = ok.len();
    let mean = |f: &dyn Fn(&RepRecord) -> f64| {
        if successes == 0 {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / successes as f64
        }
    };
    SimulationReport {
        config,
        coverage: mean(&|r| if r.covered == Some(true) { 1.0 } else { 0.0 }),
        successes,
        failures: records.len() - successes,
        mean_norm_sigma1: mean(&|r| r.norm_sigma1.unwrap_or(0.0)),
        mean_norm_sigma2: mean(&|r| r.norm_sigma2.unwrap_or(0.0)),
        mean_chosen: mean(&|r| r.chosen.unwrap_or(0) as f64),
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_function_values() {
        assert_abs_diff_eq!(true_mean(0.0), -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(true_mean(1.0), 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(true_mean(0.5), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn heteroscedastic_sd_at_zero() {
        assert_abs_diff_eq!(noise_sd(0.0, 0.1, true), 0.08, epsilon = 1e-15);
        assert_eq!(noise_sd(0.7, 0.1, false), 0.1);
    }

    #[test]
    fn count_supports() {
        assert_eq!(count_support(1, 100).unwrap(), (3, 6));
        assert_eq!(count_support(2, 100).unwrap(), (5, 10));
        assert_eq!(count_support(3, 100).unwrap(), (10, 20));
        assert_eq!(count_support(3, 400).unwrap(), (20, 40));
        assert_eq!(count_support(4, 100).unwrap(), (25, 50));
        assert!(matches!(count_support(9, 100), Err(Error::InvalidConfig { field: "setting", .. })));
        assert_eq!(count_support(4, 3), Err(Error::EmptySupport { setting: 4, n: 3 }));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = sample_counts(1, 1000, &mut rng).unwrap();
        assert!(c.iter().all(|v| (3..=6).contains(v)));
        for v in 3..=6 {
            assert!(c.contains(&v));
        }
        let c = sample_counts(4, 100, &mut rng).unwrap();
        assert!(c.iter().all(|v| (25..=50).contains(v)));
    }

    #[test]
    fn eigenfunctions_orthonormal() {
        // composite Simpson with 2001 nodes on trigonometric polynomials
        let m = 2000;
        let h = 1.0 / m as f64;
        for a in 1..=N_COMPONENTS {
            for b in 1..=N_COMPONENTS {
                let mut s = 0.0;
                for i in 0..=m {
                    let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    let x = i as f64 * h;
                    s += w * eigenfunction(a, x) * eigenfunction(b, x);
                }
                s *= h / 3.0;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-8, "({a},{b}) {s}");
            }
        }
        assert_abs_diff_eq!(eigenfunction(1, 0.25), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(eigenfunction(2, 0.0), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(eigenfunction(3, 0.125), SQRT_2, epsilon = 1e-15);
        assert_eq!(eigenvalue(1), 1.0);
        assert_eq!(eigenvalue(4), 0.125);
        assert_eq!(eigenvalue(5), 0.0);
    }

    #[test]
    fn distribution_moments() {
        let draws = 1_000_000;
        for dist in [ScoreDistribution::Normal, ScoreDistribution::Uniform, ScoreDistribution::Laplace] {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for _ in 0..draws {
                let v = dist.sample(&mut rng);
                s1 += v;
                s2 += v * v;
                s4 += v.powi(4);
            }
            let n = draws as f64;
            let mean = s1 / n;
            let var = s2 / n - mean * mean;
            assert!(mean.abs() < 0.01, "{dist:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.01, "{dist:?} var {var}");
            if dist == ScoreDistribution::Laplace {
                let kurt = s4 / n / (var * var) - 3.0;
                assert!((kurt - 3.0).abs() < 0.2, "excess kurtosis {kurt}");
            }
        }
    }

    #[test]
    fn noiseless_degenerate_data() {
        let cfg = SimulationConfig {
            sigma_eps: 0.0,
            eigen_scale: 0.0,
            n: 20,
            ..Default::default()
        };
        let (d, m) = gen_dataset(&cfg, 0).unwrap();
        for (x, y) in d.x().iter().zip(d.y()) {
            assert_eq!(*y, m(*x));
        }
    }

    #[test]
    fn dataset_deterministic_per_rep() {
        let cfg = SimulationConfig {
            n: 30,
            seed: 7,
            ..Default::default()
        };
        let (a, _) = gen_dataset(&cfg, 3).unwrap();
        let (b, _) = gen_dataset(&cfg, 3).unwrap();
        let (c, _) = gen_dataset(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.counts().all(|c| (3..=6).contains(&c)));
    }

    #[test]
    fn population_variance_matches_model() {
        // Y at a fixed x across many subjects: one observation each
        for x in [0.2, 0.5, 0.8] {
            for dist in [ScoreDistribution::Normal, ScoreDistribution::Laplace] {
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                let draws = 1_000_000;
                let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
                for _ in 0..draws {
                    let mut y = true_mean(x);
                    for k in 1..=N_COMPONENTS {
                        y += eigenvalue(k).sqrt() * dist.sample(&mut rng) * eigenfunction(k, x);
                    }
                    y += noise_sd(x, 0.1, true) * dist.sample(&mut rng);
                    let c = y - true_mean(x);
                    s1 += c;
                    s2 += c * c;
                    s4 += c.powi(4);
                }
                let n = draws as f64;
                let var = s2 / n - (s1 / n).powi(2);
                let se = ((s4 / n - (s2 / n).powi(2)) / n).sqrt();
                let target = response_variance(x, 0.1, true);
                assert!((var - target).abs() < 3.0 * se, "x={x} {var} vs {target} (se {se})");
            }
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = SimulationConfig {
            setting: 9,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "setting", .. })));
        let bad = SimulationConfig { n: 5, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "n", .. })));
        let bad = SimulationConfig { reps: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "reps", .. })));
        assert!(SimulationConfig::default().validate().is_ok());
    }

    #[test]
    fn single_rep_reproducible() {
        let cfg = SimulationConfig {
            reps: 1,
            n: 50,
            seed: 42,
            ..Default::default()
        };
        let a = run_coverage(&cfg).unwrap();
        let b = run_coverage(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 1);
        assert!((0.0..=1.0).contains(&a.coverage));
    }

    #[test]
    fn serial_parallel_reports_identical() {
        let cfg = SimulationConfig {
            reps: 6,
            n: 40,
            setting: 2,
            seed: 3,
            band: BandConfig {
                grid_size: 200,
                replications: 200,
                ..BandConfig::default()
            },
            ..Default::default()
        };
        let a = run_coverage(&SimulationConfig { parallel: false, ..cfg }).unwrap();
        let b = run_coverage(&SimulationConfig { parallel: true, ..cfg }).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.coverage, b.coverage);
    }
}
