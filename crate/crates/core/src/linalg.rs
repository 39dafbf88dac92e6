//! Dense symmetric matrix utilities: Cholesky with a pivot floor, PSD square
//! root, and the L∞ operator norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative pivot floor below which a Gram matrix counts as singular.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Eigenvalues below this fraction of the largest are clipped to zero.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Most negative eigenvalue, relative to `max(λ_max, 1)`, still accepted as
/// rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    /// Factors a symmetric matrix, failing when any pivot falls below
    /// `PIVOT_FLOOR · max_i A_ii`.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let k = a.nrows();
        let max_diag = (0..k).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
        let threshold = PIVOT_FLOOR * max_diag;
        let mut l = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            let mut d = a[(j, j)];
            for m in 0..j {
                d -= l[(j, m)] * l[(j, m)];
            }
            if !(d > threshold) {
                return Err(Error::DesignSingular {
                    dim: k,
                    pivot: d,
                    threshold,
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..k {
                let mut s = a[(i, j)];
                for m in 0..j {
                    s -= l[(i, m)] * l[(j, m)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let z = self
            .lower
            .solve_lower_triangular(b)
            .expect("factor has a positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&z)
            .expect("factor has a positive diagonal")
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let z = self
            .lower
            .solve_lower_triangular(b)
            .expect("factor has a positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&z)
            .expect("factor has a positive diagonal")
    }

    /// `A⁻¹ M A⁻¹` for symmetric `M`, symmetrized.
    pub fn sandwich(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let left = self.solve_matrix(m);
        let both = self.solve_matrix(&left.transpose());
        symmetrize(&both)
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root `U Λ^{1/2} Uᵀ`.
///
/// Eigenvalues under `EIGEN_CLIP · λ_max` are set to zero; an eigenvalue
/// below `-PSD_TOLERANCE · max(λ_max, 1)` is an error.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    let floor = -PSD_TOLERANCE * lambda_max.max(1.0);
    if min < floor {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            floor,
        });
    }
    let clip = EIGEN_CLIP * lambda_max;
    let roots = eig
        .eigenvalues
        .map(|v| if v <= clip || v <= 0.0 { 0.0 } else { v.sqrt() });
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(k, k, |i, j| u[(i, j)] * roots[j]);
    Ok(symmetrize(&(scaled * u.transpose())))
}

/// Maximum absolute row sum.
pub fn op_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.max()
}
