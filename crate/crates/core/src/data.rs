//! Ragged longitudinal samples.

use crate::error::{Error, Result};

/// Design points and responses for `n` subjects, subject `i` contributing
/// `N_i` pairs `(X_ij, Y_ij)` with every `X_ij` in `[0, 1]`.
///
/// Stored contiguously: subject `i` owns `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    offsets: Vec<usize>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl ObservationSet {
    /// Builds a set from per-subject `(x, y)` vectors.
    pub fn from_subjects<I>(subjects: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, Vec<f64>)>,
    {
        let mut offsets = vec![0];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, (x, y)) in subjects.into_iter().enumerate() {
            if x.len() != y.len() {
                return Err(Error::InvalidData(format!(
                    "subject {i}: {} design points but {} responses",
                    x.len(),
                    y.len()
                )));
            }
            if x.is_empty() {
                return Err(Error::InvalidData(format!("subject {i} has no observations")));
            }
            xs.extend_from_slice(&x);
            ys.extend_from_slice(&y);
            offsets.push(xs.len());
        }
        Self::from_parts(offsets, xs, ys)
    }

    /// Builds a set from the contiguous layout directly.
    pub fn from_parts(offsets: Vec<usize>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::InvalidData("at least one subject is required".into()));
        }
        if offsets[0] != 0 || *offsets.last().unwrap() != x.len() || x.len() != y.len() {
            return Err(Error::InvalidData("inconsistent offsets".into()));
        }
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData("every subject needs at least one observation".into()));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain { x: *bad });
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite response at position {pos}")));
        }
        let singles = offsets.windows(2).filter(|w| w[1] - w[0] == 1).count();
        if singles > 0 {
            log::warn!(
                "{singles} subject(s) with a single observation: they enter the mean fit \
                 and the diagonal covariance term only"
            );
        }
        Ok(Self { offsets, x, y })
    }

    /// Number of subjects `n`.
    pub fn n_subjects(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of observations `Σ N_i` (equal to `n·N̄`).
    pub fn total(&self) -> usize {
        self.x.len()
    }

    /// Mean count per subject `N̄`.
    pub fn mean_count(&self) -> f64 {
        self.total() as f64 / self.n_subjects() as f64
    }

    pub fn counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Index range of subject `i` in [`x`](Self::x) and [`y`](Self::y).
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn subject(&self, i: usize) -> (&[f64], &[f64]) {
        let r = self.range(i);
        (&self.x[r.clone()], &self.y[r])
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        (0..self.n_subjects()).map(move |i| self.subject(i))
    }

    /// Same design with responses replaced by `f(x, y)`.
    pub fn map_responses(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let y = self.x.iter().zip(&self.y).map(|(x, y)| f(*x, *y)).collect();
        Self {
            offsets: self.offsets.clone(),
            x: self.x.clone(),
            y,
        }
    }

    /// Subjects reordered by `order` (a permutation of `0..n`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut offsets = vec![0];
        let mut x = Vec::with_capacity(self.total());
        let mut y = Vec::with_capacity(self.total());
        for &i in order {
            let (sx, sy) = self.subject(i);
            x.extend_from_slice(sx);
            y.extend_from_slice(sy);
            offsets.push(x.len());
        }
        Self { offsets, x, y }
    }
}
