//! Pooled least-squares fit of the mean function.
//!
//! With `B(x)` the basis vector, the estimator solves
//! `V θ = r` where `V = (nN̄)⁻¹ Σ_i Σ_j B(X_ij) Bᵀ(X_ij)` and
//! `r = (nN̄)⁻¹ Σ_i Σ_j B(X_ij) Y_ij`; the same normal equations serve the
//! B-spline and orthogonal-series estimators.

use nalgebra::{DMatrix, DVector};

use crate::accumulate::{fold_subjects, CompensatedBuf};
use crate::basis::BasisSpec;
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

/// Fitted coefficients together with the Gram matrix and its factor.
#[derive(Debug, Clone)]
pub struct MeanFit {
    spec: BasisSpec,
    theta: DVector<f64>,
    gram: DMatrix<f64>,
    gram_chol: CholeskyFactor,
    n_subjects: usize,
    mean_count: f64,
}

impl MeanFit {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_chol(&self) -> &CholeskyFactor {
        &self.gram_chol
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn mean_count(&self) -> f64 {
        self.mean_count
    }

    /// `m̂(x) = Bᵀ(x) θ̂`.
    pub fn predict(&self, x: f64) -> Result<f64> {
        let mut local = vec![0.0; self.spec.support_width()];
        let start = self.spec.eval_local(x, &mut local)?;
        Ok(local
            .iter()
            .enumerate()
            .map(|(a, b)| b * self.theta[start + a])
            .sum())
    }

    /// Fit with the same basis and Gram matrix but coefficients `theta`.
    pub fn with_theta(&self, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != self.spec.dim() {
            return Err(Error::InvalidBasis(format!(
                "expected {} coefficients, got {}",
                self.spec.dim(),
                theta.len()
            )));
        }
        Ok(Self {
            theta,
            ..self.clone()
        })
    }
}

struct NormalEquations {
    gram: CompensatedBuf,
    rhs: CompensatedBuf,
}

fn accumulate(data: &ObservationSet, spec: &BasisSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let k = spec.dim();
    let width = spec.support_width();
    let acc = fold_subjects(
        data.n_subjects(),
        true,
        || NormalEquations {
            gram: CompensatedBuf::zeros(k * k),
            rhs: CompensatedBuf::zeros(k),
        },
        |acc, i| {
            let mut b = vec![0.0; width];
            let (xs, ys) = data.subject(i);
            for (&x, &y) in xs.iter().zip(ys) {
                let s = spec.eval_local(x, &mut b)?;
                for a in 0..width {
                    if b[a] == 0.0 {
                        continue;
                    }
                    acc.rhs.add(s + a, b[a] * y);
                    for c in a..width {
                        acc.gram.add((s + a) * k + s + c, b[a] * b[c]);
                    }
                }
            }
            Ok(())
        },
        |total, part| {
            total.gram.merge(&part.gram);
            total.rhs.merge(&part.rhs);
        },
    )?;
    let scale = 1.0 / data.total() as f64;
    let upper = acc.gram.finish();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        upper[r * k + c] * scale
    });
    let rhs = DVector::from_iterator(k, acc.rhs.finish().into_iter().map(|v| v * scale));
    Ok((gram, rhs))
}

/// Refinement sweeps applied after the first Cholesky solve.
const REFINE_STEPS: usize = 3;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `(nN̄)⁻¹ Σ B(X_ij) {Y_ij − Bᵀ(X_ij) θ}` with the residuals carried in
/// double-double precision.
fn gradient(data: &ObservationSet, spec: &BasisSpec, theta: &DVector<f64>) -> Result<DVector<f64>> {
    let k = spec.dim();
    let width = spec.support_width();
    let acc = fold_subjects(
        data.n_subjects(),
        true,
        || CompensatedBuf::zeros(k),
        |acc, i| {
            let mut b = vec![0.0; width];
            let (xs, ys) = data.subject(i);
            for (&x, &y) in xs.iter().zip(ys) {
                let s = spec.eval_local(x, &mut b)?;
                let (mut hi, mut lo) = (y, 0.0);
                for a in 0..width {
                    let p = b[a] * theta[s + a];
                    let e = b[a].mul_add(theta[s + a], -p);
                    let (t, err) = two_sum(hi, -p);
                    hi = t;
                    lo += err - e;
                }
                let (hi, lo) = two_sum(hi, lo);
                for a in 0..width {
                    let p = b[a] * hi;
                    acc.add(s + a, p);
                    acc.add(s + a, b[a].mul_add(hi, -p) + b[a] * lo);
                }
            }
            Ok(())
        },
        |total, part| total.merge(&part),
    )?;
    let scale = 1.0 / data.total() as f64;
    Ok(DVector::from_iterator(k, acc.finish().into_iter().map(|v| v * scale)))
}

/// Iterative refinement against residuals computed from the raw data.
fn refine(data: &ObservationSet, spec: &BasisSpec, chol: &CholeskyFactor, mut theta: DVector<f64>) -> Result<DVector<f64>> {
    for _ in 0..REFINE_STEPS {
        let delta = chol.solve(&gradient(data, spec, &theta)?);
        let size = delta.norm();
        if !size.is_finite() || size > theta.norm() {
            break;
        }
        theta += delta;
        if size <= f64::EPSILON * theta.norm() {
            break;
        }
    }
    Ok(theta)
}

/// Solves the pooled normal equations for `spec` on `data`.
///
/// Fails with [`Error::DesignSingular`] when the Gram matrix has a Cholesky
/// pivot below `1e-12 · max diag`.
pub fn fit_mean(data: &ObservationSet, spec: &BasisSpec) -> Result<MeanFit> {
    let (gram, rhs) = accumulate(data, spec)?;
    let gram_chol = CholeskyFactor::new(&gram)?;
    let theta = refine(data, spec, &gram_chol, gram_chol.solve(&rhs))?;
    Ok(MeanFit {
        spec: spec.clone(),
        theta,
        gram,
        gram_chol,
        n_subjects: data.n_subjects(),
        mean_count: data.mean_count(),
    })
}

/// `Û_ij = Y_ij − m̂(X_ij)`, laid out like `data.y()`.
pub fn residuals(fit: &MeanFit, data: &ObservationSet) -> Result<Vec<f64>> {
    data.x()
        .iter()
        .zip(data.y())
        .map(|(&x, &y)| Ok(y - fit.predict(x)?))
        .collect()
}

/// `m̂(x)` for a fitted model.
pub fn predict(fit: &MeanFit, x: f64) -> Result<f64> {
    fit.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_data(n: usize, per: usize, seed: u64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ObservationSet::from_subjects((0..n).map(|_| {
            let x: Vec<f64> = (0..per).map(|_| rng.random::<f64>()).collect();
            let y = x.iter().map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            (x, y)
        }))
        .unwrap()
    }

    /// Dense normal equations solved by Gauss–Jordan inversion.
    fn oracle_theta(data: &ObservationSet, spec: &BasisSpec) -> Vec<f64> {
        let k = spec.dim();
        let mut a = vec![vec![0.0; 2 * k]; k];
        let mut r = vec![0.0; k];
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let b = spec.eval(x).unwrap();
            for i in 0..k {
                r[i] += b[i] * y;
                for j in 0..k {
                    a[i][j] += b[i] * b[j];
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[k + i] = 1.0;
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|p, q| a[*p][col].abs().total_cmp(&a[*q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for v in a[col].iter_mut() {
                *v /= d;
            }
            for row in 0..k {
                if row != col {
                    let f = a[row][col];
                    let pivot_row = a[col].clone();
                    for (v, p) in a[row].iter_mut().zip(pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        (0..k).map(|i| (0..k).map(|j| a[i][k + j] * r[j]).sum()).collect()
    }

    #[test]
    fn constant_response_reproduced() {
        let d = random_data(20, 6, 1).map_responses(|_, _| 5.0);
        for j in [0, 2, 5] {
            let fit = fit_mean(&d, &BasisSpec::cubic(j)).unwrap();
            for x in [0.0, 0.1, 0.731, 1.0] {
                assert!((fit.predict(x).unwrap() - 5.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_response_exact_with_hats() {
        let d = random_data(15, 5, 2).map_responses(|x, _| x);
        let fit = fit_mean(&d, &BasisSpec::bspline(2, 3).unwrap()).unwrap();
        assert!(residuals(&fit, &d).unwrap().iter().all(|u| u.abs() < 1e-10));
        assert!((fit.predict(0.25).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_oracle_small() {
        let d = random_data(5, 3, 3);
        let spec = BasisSpec::bspline(4, 0).unwrap();
        let fit = fit_mean(&d, &spec).unwrap();
        for (a, b) in fit.theta().iter().zip(oracle_theta(&d, &spec)) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn oracle_equivalence_many() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..60 {
            let n = rng.random_range(5..30);
            let per = rng.random_range(2..7);
            let d = random_data(n, per, 1000 + case);
            let spec = match case % 3 {
                0 => BasisSpec::bspline(rng.random_range(1..5), rng.random_range(0..6)).unwrap(),
                1 => BasisSpec::fourier(2 * rng.random_range(0..5) + 1).unwrap(),
                _ => BasisSpec::legendre(rng.random_range(1..10)).unwrap(),
            };
            if spec.dim() > 12 || d.total() > 200 {
                continue;
            }
            let Ok(fit) = fit_mean(&d, &spec) else { continue };
            let oracle = oracle_theta(&d, &spec);
            let scale = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (a, b) in fit.theta().iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-8 * scale.max(1.0), "case {case}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn normal_equation_residual_small() {
        let d = random_data(40, 8, 5);
        let spec = BasisSpec::cubic(6);
        let fit = fit_mean(&d, &spec).unwrap();
        let mut rhs = DVector::zeros(spec.dim());
        for (&x, &y) in d.x().iter().zip(d.y()) {
            let b = spec.eval(x).unwrap();
            for i in 0..spec.dim() {
                rhs[i] += b[i] * y / d.total() as f64;
            }
        }
        let res = fit.gram() * fit.theta() - &rhs;
        assert!(res.norm() <= 1e-10 * rhs.norm());
    }

    #[test]
    fn singular_design_is_an_error() {
        // all design points in one knot interval: cubic spline with many
        // knots cannot be identified
        let d = ObservationSet::from_subjects(vec![
            (vec![0.01, 0.02, 0.03], vec![1.0, 2.0, 3.0]),
            (vec![0.04, 0.05], vec![0.0, 1.0]),
        ])
        .unwrap();
        assert!(matches!(
            fit_mean(&d, &BasisSpec::cubic(8)),
            Err(Error::DesignSingular { dim: 12, .. })
        ));
    }

    #[test]
    fn predict_with_unit_fourier_coefficient() {
        let d = random_data(10, 4, 9);
        let fit = fit_mean(&d, &BasisSpec::fourier(3).unwrap()).unwrap();
        let fit = fit.with_theta(DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert_eq!(predict(&fit, x).unwrap(), 1.0);
        }
        assert!(fit.predict(1.1).is_err());
    }

    #[test]
    fn residual_shift_and_oracle() {
        let d = random_data(12, 5, 10);
        let fit = fit_mean(&d, &BasisSpec::cubic(1)).unwrap();
        let shifted = d.map_responses(|x, _| fit.predict(x).unwrap() + 1.0);
        for u in residuals(&fit, &shifted).unwrap() {
            assert!((u - 1.0).abs() < 1e-12);
        }
        let res = residuals(&fit, &d).unwrap();
        let mut idx = 0;
        for (xs, ys) in d.subjects() {
            for (x, y) in xs.iter().zip(ys) {
                let b = fit.spec().eval(*x).unwrap();
                assert_eq!(res[idx], y - b.dot(fit.theta().as_slice()));
                idx += 1;
            }
        }
    }

    #[test]
    fn subject_permutation_invariance() {
        let d = random_data(70, 4, 12);
        let order: Vec<usize> = (0..70).rev().collect();
        let spec = BasisSpec::cubic(4);
        let a = fit_mean(&d, &spec).unwrap();
        let b = fit_mean(&d.permuted(&order), &spec).unwrap();
        for (u, v) in a.theta().iter().zip(b.theta().iter()) {
            assert_relative_eq!(u, v, max_relative = 1e-12, epsilon = 1e-13);
        }
        assert!((a.gram() - b.gram()).abs().max() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scaling_responses_scales_fit(seed in 0u64..1000, c in -5.0f64..5.0) {
            let d = random_data(25, 5, seed);
            let spec = BasisSpec::cubic(3);
            let a = fit_mean(&d, &spec).unwrap();
            let b = fit_mean(&d.map_responses(|_, y| c * y), &spec).unwrap();
            for (u, v) in a.theta().iter().zip(b.theta().iter()) {
                prop_assert!((c * u - v).abs() <= 1e-12 * (c * u).abs().max(1e-12) + 1e-13);
            }
        }

        #[test]
        fn in_span_data_has_zero_residuals(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = BasisSpec::cubic(rng.random_range(0..5));
            let coef: Vec<f64> = (0..spec.dim()).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let d = random_data(30, 5, seed + 1)
                .map_responses(|x, _| spec.eval(x).unwrap().dot(&coef));
            let fit = fit_mean(&d, &spec).unwrap();
            for u in residuals(&fit, &d).unwrap() {
                prop_assert!(u.abs() < 1e-9);
            }
        }
    }
}
