//! BIC choice of the basis size.
//!
//! `BIC(J) = log[(nN̄)⁻¹ Σ Û²_ij] + J log(nN̄) / (nN̄)`, minimized over the
//! integers `J ∈ [0.5 (nN̄)^{1/6}, 2 (nN̄)^{1/4}]`.

use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::fit::{fit_mean, residuals, MeanFit};

/// Floor applied to the mean squared residual before the logarithm.
pub const MSE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Fitted,
    /// The Gram matrix was singular.
    Singular,
    /// The size is not valid for the basis family (even Fourier dimension).
    Invalid,
}

impl CandidateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateStatus::Fitted => "fitted",
            CandidateStatus::Singular => "singular",
            CandidateStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub size: usize,
    /// `None` unless fitted.
    pub bic: Option<f64>,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
    pub range: (usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Overrides the default candidate range.
    pub range: Option<(usize, usize)>,
    /// Penalize with the basis dimension `K` instead of the size `J`.
    pub penalize_dimension: bool,
}

/// Default candidate range `[⌈0.5 T^{1/6}⌉, ⌊2 T^{1/4}⌋]` for `T = nN̄`
/// observations, computed in exact integer arithmetic.
pub fn knot_range(total: usize) -> (usize, usize) {
    let t = total as u128;
    // smallest J with (2J)^6 >= T
    let mut lo = 0u128;
    while (2 * lo).pow(6) < t {
        lo += 1;
    }
    // largest J with J^4 <= 16 T
    let mut hi = 0u128;
    while (hi + 1).pow(4) <= 16 * t {
        hi += 1;
    }
    (lo as usize, hi as usize)
}

fn bic_value(sse: f64, total: usize, penalty_count: usize) -> f64 {
    let t = total as f64;
    (sse / t).max(MSE_FLOOR).ln() + penalty_count as f64 * t.ln() / t
}

/// BIC of a fitted model, penalizing by its size parameter `J`.
pub fn bic(fit: &MeanFit, data: &ObservationSet) -> Result<f64> {
    let sse: f64 = residuals(fit, data)?.iter().map(|u| u * u).sum();
    Ok(bic_value(sse, data.total(), fit.spec().size()))
}

/// Evaluates every candidate size and returns the BIC minimizer, ties going
/// to the smaller size.
pub fn select_knots(data: &ObservationSet, family: BasisFamily, opts: SelectOptions) -> Result<SelectionResult> {
    let (jmin, jmax) = opts.range.unwrap_or_else(|| knot_range(data.total()));
    if jmin > jmax {
        return Err(Error::InvalidConfig {
            field: "range",
            reason: format!("empty candidate range {jmin}..={jmax}"),
        });
    }
    let mut candidates = Vec::with_capacity(jmax - jmin + 1);
    for size in jmin..=jmax {
        let spec = match family.with_size(size) {
            Ok(s) => s,
            Err(_) => {
                candidates.push(Candidate {
                    size,
                    bic: None,
                    status: CandidateStatus::Invalid,
                });
                continue;
            }
        };
        match fit_mean(data, &spec) {
            Ok(fit) => {
                let sse: f64 = residuals(&fit, data)?.iter().map(|u| u * u).sum();
                let count = if opts.penalize_dimension { spec.dim() } else { size };
                candidates.push(Candidate {
                    size,
                    bic: Some(bic_value(sse, data.total(), count)),
                    status: CandidateStatus::Fitted,
                });
            }
            Err(Error::DesignSingular { .. }) => candidates.push(Candidate {
                size,
                bic: None,
                status: CandidateStatus::Singular,
            }),
            Err(e) => return Err(e),
        }
    }
    let chosen = candidates
        .iter()
        .filter_map(|c| c.bic.map(|v| (c.size, v)))
        .fold(None::<(usize, f64)>, |best, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .map(|c| c.0)
        .ok_or(Error::NoFeasibleKnots { jmin, jmax })?;
    Ok(SelectionResult {
        candidates,
        chosen,
        range: (jmin, jmax),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn range_examples() {
        assert_eq!(knot_range(4096), (2, 16));
        // brute-force check of the real-valued bounds away from ties
        for t in [10usize, 100, 450, 1000, 1600, 45_000, 99_999] {
            let tf = t as f64;
            let lo = (0.5 * tf.powf(1.0 / 6.0)).ceil() as usize;
            let hi = (2.0 * tf.powf(0.25)).floor() as usize;
            assert_eq!(knot_range(t), (lo, hi), "T = {t}");
        }
    }

    #[test]
    fn bic_arithmetic() {
        assert_abs_diff_eq!(bic_value(100.0, 100, 2), 2.0 * 100f64.ln() / 100.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bic_value(100.0, 100, 2), 0.09210340371976183, epsilon = 1e-12);
        let perfect = bic_value(0.0, 100, 2);
        assert!(perfect.is_finite() && perfect < -690.0);
        assert_abs_diff_eq!(
            bic_value(400.0, 100, 2) - bic_value(100.0, 100, 2),
            4f64.ln(),
            epsilon = 1e-12
        );
    }

    fn sample(seed: u64, n: usize, mean: impl Fn(f64) -> f64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ObservationSet::from_subjects((0..n).map(|_| {
            let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let y = x.iter().map(|x| mean(*x) + 0.1 * (rng.random::<f64>() - 0.5)).collect();
            (x, y)
        }))
        .unwrap()
    }

    #[test]
    fn bic_from_fit() {
        let d = sample(1, 20, |x| x * x);
        let fit = fit_mean(&d, &BasisSpec::cubic(3)).unwrap();
        let sse: f64 = residuals(&fit, &d).unwrap().iter().map(|u| u * u).sum();
        let expect = (sse / 200.0).ln() + 3.0 * 200f64.ln() / 200.0;
        assert_abs_diff_eq!(bic(&fit, &d).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn oscillatory_needs_more_knots() {
        let flat = sample(5, 100, |x| 1.0 + 0.5 * x);
        let wiggly = sample(5, 100, |x| (12.0 * x).sin());
        let fam = BasisFamily::default();
        let a = select_knots(&flat, fam, SelectOptions::default()).unwrap();
        let b = select_knots(&wiggly, fam, SelectOptions::default()).unwrap();
        assert!(b.chosen > a.chosen, "{} vs {}", b.chosen, a.chosen);
        for r in [&a, &b] {
            let best = r.candidates.iter().find(|c| c.size == r.chosen).unwrap().bic.unwrap();
            for c in r.candidates.iter().filter_map(|c| c.bic) {
                assert!(best <= c);
            }
            assert!(r.range.0 <= r.chosen && r.chosen <= r.range.1);
        }
        assert_eq!(a, select_knots(&flat, fam, SelectOptions::default()).unwrap());
    }

    #[test]
    fn single_candidate_and_failures() {
        let d = sample(2, 10, |x| x);
        let opts = SelectOptions {
            range: Some((3, 3)),
            ..Default::default()
        };
        assert_eq!(select_knots(&d, BasisFamily::default(), opts).unwrap().chosen, 3);

        // four distinct design points: only tiny bases are identifiable
        let tiny = ObservationSet::from_subjects(vec![
            (vec![0.1, 0.4], vec![1.0, 2.0]),
            (vec![0.6, 0.9], vec![0.0, 1.0]),
        ])
        .unwrap();
        let opts = SelectOptions {
            range: Some((5, 8)),
            ..Default::default()
        };
        assert_eq!(
            select_knots(&tiny, BasisFamily::default(), opts),
            Err(Error::NoFeasibleKnots { jmin: 5, jmax: 8 })
        );
    }

    #[test]
    fn fourier_skips_even_sizes() {
        let d = sample(3, 50, |x| (2.0 * std::f64::consts::PI * x).sin());
        let r = select_knots(&d, BasisFamily::Fourier, SelectOptions::default()).unwrap();
        assert!(r.chosen % 2 == 1);
        assert!(r
            .candidates
            .iter()
            .all(|c| (c.size % 2 == 0) == (c.status == CandidateStatus::Invalid)));
    }

    #[test]
    fn constant_response_finite() {
        let d = sample(4, 30, |_| 2.0).map_responses(|_, _| 2.0);
        let r = select_knots(&d, BasisFamily::default(), SelectOptions::default()).unwrap();
        assert!(r.candidates.iter().all(|c| c.bic.is_some_and(f64::is_finite)));
    }
}
