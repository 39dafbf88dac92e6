//! Plug-in covariance of the normalized mean estimator.
//!
//! With residuals `Û_ij` and `s_i = Σ_j B(X_ij) Û_ij`,
//!
//! ```text
//! Σ̂₂ = V̂⁻¹ [ (nN̄²)⁻¹ Σ_i Σ_j B(X_ij) Bᵀ(X_ij) Û²_ij ] V̂⁻¹
//! Σ̂₁ = V̂⁻¹ [ (nN̄²)⁻¹ Σ_i (s_i s_iᵀ − Σ_j B(X_ij) Bᵀ(X_ij) Û²_ij) ] V̂⁻¹
//! ```
//!
//! `Σ̂₁` carries the within-subject cross terms `j ≠ j′` and `Σ̂₂` the
//! diagonal terms. Their sum is PSD; `Σ̂₁` alone need not be.

use nalgebra::{DMatrix, DVector};

use crate::accumulate::{fold_subjects, CompensatedBuf};
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::fit::{residuals, MeanFit};
use crate::linalg::{self, symmetrize};

/// Scales below this are treated as zero.
pub const SCALE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct CovarianceStructure {
    sigma1: DMatrix<f64>,
    sigma2: DMatrix<f64>,
    sigma: DMatrix<f64>,
    sqrt_sigma: DMatrix<f64>,
    n_subjects: usize,
    mean_count: f64,
}

impl CovarianceStructure {
    /// Assembles the structure from its two components.
    pub fn from_parts(
        sigma1: DMatrix<f64>,
        sigma2: DMatrix<f64>,
        n_subjects: usize,
        mean_count: f64,
    ) -> Result<Self> {
        if sigma1.shape() != sigma2.shape() || !sigma1.is_square() {
            return Err(Error::InvalidData("covariance blocks must be square and equal-sized".into()));
        }
        let sigma = &sigma1 + &sigma2;
        let sqrt_sigma = linalg::psd_sqrt(&sigma)?;
        Ok(Self {
            sigma1,
            sigma2,
            sigma,
            sqrt_sigma,
            n_subjects,
            mean_count,
        })
    }

    /// A structure whose total covariance is `sigma` (all in `Σ̂₂`).
    pub fn from_sigma(sigma: DMatrix<f64>, n_subjects: usize) -> Result<Self> {
        let k = sigma.nrows();
        Self::from_parts(DMatrix::zeros(k, k), sigma, n_subjects, 1.0)
    }

    pub fn sigma1(&self) -> &DMatrix<f64> {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &DMatrix<f64> {
        &self.sigma2
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sqrt_sigma(&self) -> &DMatrix<f64> {
        &self.sqrt_sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn mean_count(&self) -> f64 {
        self.mean_count
    }

    /// `‖Σ̂₁‖∞` (maximum absolute row sum).
    pub fn norm_sigma1(&self) -> f64 {
        linalg::op_inf_norm(&self.sigma1)
    }

    /// `‖Σ̂₂‖∞` (maximum absolute row sum).
    pub fn norm_sigma2(&self) -> f64 {
        linalg::op_inf_norm(&self.sigma2)
    }

    /// `‖Σ̂^{1/2} b‖₂` for a basis block starting at `start`.
    pub(crate) fn scale_local(&self, start: usize, local: &[f64]) -> f64 {
        let k = self.dim();
        let mut sq = 0.0;
        for r in 0..k {
            let mut v = 0.0;
            for (a, b) in local.iter().enumerate() {
                v += self.sqrt_sigma[(r, start + a)] * b;
            }
            sq += v * v;
        }
        sq.sqrt()
    }
}

struct Middles {
    cross: CompensatedBuf,
    diag: CompensatedBuf,
}

/// Estimates `Σ̂₁`, `Σ̂₂`, their sum and its square root.
pub fn estimate_covariance(fit: &MeanFit, data: &ObservationSet) -> Result<CovarianceStructure> {
    let res = residuals(fit, data)?;
    estimate_from_residuals(fit, data, &res)
}

pub(crate) fn estimate_from_residuals(
    fit: &MeanFit,
    data: &ObservationSet,
    res: &[f64],
) -> Result<CovarianceStructure> {
    let spec = fit.spec();
    let k = spec.dim();
    let width = spec.support_width();
    let acc = fold_subjects(
        data.n_subjects(),
        true,
        || Middles {
            cross: CompensatedBuf::zeros(k * k),
            diag: CompensatedBuf::zeros(k * k),
        },
        |acc, i| {
            let range = data.range(i);
            let mut b = vec![0.0; width];
            let mut s = vec![0.0; k];
            let mut d = vec![0.0; k * k];
            for idx in range {
                let u = res[idx];
                let start = spec.eval_local(data.x()[idx], &mut b)?;
                for a in 0..width {
                    s[start + a] += b[a] * u;
                    for c in a..width {
                        d[(start + a) * k + start + c] += b[a] * b[c] * u * u;
                    }
                }
            }
            for r in 0..k {
                for c in r..k {
                    let dv = d[r * k + c];
                    acc.diag.add(r * k + c, dv);
                    acc.cross.add(r * k + c, s[r] * s[c] - dv);
                }
            }
            Ok(())
        },
        |total, part| {
            total.cross.merge(&part.cross);
            total.diag.merge(&part.diag);
        },
    )?;

    let n = data.n_subjects() as f64;
    let nbar = data.mean_count();
    let scale = 1.0 / (n * nbar * nbar);
    let full = |buf: CompensatedBuf| {
        let upper = buf.finish();
        DMatrix::from_fn(k, k, |i, j| {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            upper[r * k + c] * scale
        })
    };
    let chol = fit.gram_chol();
    let sigma1 = symmetrize(&chol.sandwich(&full(acc.cross)));
    let sigma2 = symmetrize(&chol.sandwich(&full(acc.diag)));
    CovarianceStructure::from_parts(sigma1, sigma2, data.n_subjects(), nbar)
}

/// Symmetric PSD square root; see [`linalg::psd_sqrt`].
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::psd_sqrt(m)
}

/// L∞ operator norm (maximum absolute row sum).
pub fn op_inf_norm(m: &DMatrix<f64>) -> f64 {
    linalg::op_inf_norm(m)
}

/// `‖Σ̂^{1/2} B(x)‖₂`, the pointwise standard-error scale of `√n·m̂(x)`.
pub fn pointwise_scale(fit: &MeanFit, cov: &CovarianceStructure, x: f64) -> Result<f64> {
    let spec = fit.spec();
    let mut local = vec![0.0; spec.support_width()];
    let start = spec.eval_local(x, &mut local)?;
    let v = cov.scale_local(start, &local);
    if v < SCALE_FLOOR {
        return Err(Error::DegenerateScale { x });
    }
    Ok(v)
}

/// Unnormalized multiplier direction `Σ̂^{1/2} w`.
pub fn correlate(cov: &CovarianceStructure, w: &DVector<f64>) -> DVector<f64> {
    cov.sqrt_sigma() * w
}
