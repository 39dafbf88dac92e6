//! Basis systems on the unit interval.
//!
//! Three families are supported behind one [`BasisSpec`]:
//!
//! * B-splines of order `p` (degree `p - 1`) on `J` equally spaced interior
//!   knots, giving `K = J + p` functions;
//! * the real Fourier system `1, √2 cos(2πx), √2 sin(2πx), …` of odd
//!   dimension `J`;
//! * shifted Legendre polynomials, orthonormal under Lebesgue measure on
//!   `[0, 1]`, of dimension `J`.
//!
//! All evaluators reject `x` outside `[0, 1]`.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported B-spline order.
pub const MAX_ORDER: usize = 32;

/// Equally spaced knots `t_l = l / (J + 1)`, `l = 0..=J+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    interior: usize,
    knots: Vec<f64>,
}

impl KnotGrid {
    pub fn new(interior: usize) -> Self {
        let m = (interior + 1) as f64;
        let knots = (0..=interior + 1).map(|l| l as f64 / m).collect();
        Self { interior, knots }
    }

    /// Number of interior knots `J`.
    pub fn interior(&self) -> usize {
        self.interior
    }

    /// Boundary and interior knots, `0` first and `1` last.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index `l` of the sub-interval `[t_l, t_{l+1})` holding `x`; the last
    /// interval is closed on the right.
    pub fn interval(&self, x: f64) -> usize {
        let l = (x * (self.interior + 1) as f64).floor() as usize;
        let mut l = l.min(self.interior);
        // floor() can land one cell off when x sits on a knot that is not
        // exactly representable.
        while l > 0 && x < self.knots[l] {
            l -= 1;
        }
        while l < self.interior && x >= self.knots[l + 1] {
            l += 1;
        }
        l
    }
}

/// Equally spaced knot grid with `interior` interior knots.
pub fn make_knot_grid(interior: usize) -> KnotGrid {
    KnotGrid::new(interior)
}

/// Which basis family and how many functions.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    BSpline { order: usize, grid: KnotGrid },
    Fourier { dim: usize },
    Legendre { dim: usize },
}

/// Basis family without a size, used as a template for dimension selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "family")]
pub enum BasisFamily {
    BSpline { order: usize },
    Fourier,
    Legendre,
}

impl Default for BasisFamily {
    fn default() -> Self {
        BasisFamily::BSpline { order: 4 }
    }
}

impl BasisFamily {
    /// Concrete spec with size parameter `size`: interior knot count for
    /// B-splines, series dimension otherwise.
    pub fn with_size(self, size: usize) -> Result<BasisSpec> {
        match self {
            BasisFamily::BSpline { order } => BasisSpec::bspline(order, size),
            BasisFamily::Fourier => BasisSpec::fourier(size),
            BasisFamily::Legendre => BasisSpec::legendre(size),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::BSpline { .. } => "bspline",
            BasisFamily::Fourier => "fourier",
            BasisFamily::Legendre => "legendre",
        }
    }
}

impl BasisSpec {
    /// Cubic B-splines with `interior` knots.
    pub fn cubic(interior: usize) -> Self {
        BasisSpec::BSpline {
            order: 4,
            grid: KnotGrid::new(interior),
        }
    }

    pub fn bspline(order: usize, interior: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidBasis(format!(
                "B-spline order must lie in 1..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(BasisSpec::BSpline {
            order,
            grid: KnotGrid::new(interior),
        })
    }

    pub fn fourier(dim: usize) -> Result<Self> {
        if dim == 0 || dim % 2 == 0 {
            return Err(Error::InvalidBasis(format!(
                "Fourier dimension must be odd and positive, got {dim}"
            )));
        }
        Ok(BasisSpec::Fourier { dim })
    }

    pub fn legendre(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBasis("Legendre dimension must be positive".into()));
        }
        Ok(BasisSpec::Legendre { dim })
    }

    /// Number of basis functions `K`.
    pub fn dim(&self) -> usize {
        match self {
            BasisSpec::BSpline { order, grid } => grid.interior() + order,
            BasisSpec::Fourier { dim } | BasisSpec::Legendre { dim } => *dim,
        }
    }

    /// The size parameter the spec was built from (`J`).
    pub fn size(&self) -> usize {
        match self {
            BasisSpec::BSpline { grid, .. } => grid.interior(),
            BasisSpec::Fourier { dim } | BasisSpec::Legendre { dim } => *dim,
        }
    }

    pub fn family(&self) -> BasisFamily {
        match self {
            BasisSpec::BSpline { order, .. } => BasisFamily::BSpline { order: *order },
            BasisSpec::Fourier { .. } => BasisFamily::Fourier,
            BasisSpec::Legendre { .. } => BasisFamily::Legendre,
        }
    }

    /// Order `p` for B-splines, `None` for series bases.
    pub fn order(&self) -> Option<usize> {
        match self {
            BasisSpec::BSpline { order, .. } => Some(*order),
            _ => None,
        }
    }

    /// Largest number of nonzero entries a basis vector can have.
    pub fn support_width(&self) -> usize {
        match self {
            BasisSpec::BSpline { order, .. } => *order,
            _ => self.dim(),
        }
    }

    /// Writes the nonzero block of the basis vector at `x` into `out`
    /// (length [`support_width`](Self::support_width)) and returns the index
    /// of its first entry. Entries outside the block are zero.
    pub fn eval_local(&self, x: f64, out: &mut [f64]) -> Result<usize> {
        check_unit(x)?;
        match self {
            BasisSpec::BSpline { order, grid } => Ok(bspline_local(*order, grid, x, out)),
            BasisSpec::Fourier { dim } => {
                fourier_into(x, &mut out[..*dim]);
                Ok(0)
            }
            BasisSpec::Legendre { dim } => {
                legendre_into(x, &mut out[..*dim]);
                Ok(0)
            }
        }
    }

    /// Dense basis vector at `x`.
    pub fn eval(&self, x: f64) -> Result<BasisVector> {
        let mut local = vec![0.0; self.support_width()];
        let start = self.eval_local(x, &mut local)?;
        let mut values = vec![0.0; self.dim()];
        values[start..start + local.len()].copy_from_slice(&local);
        Ok(BasisVector(values))
    }
}

/// Basis functions evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector(Vec<f64>);

impl BasisVector {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, coef: &[f64]) -> f64 {
        self.0.iter().zip(coef).map(|(a, b)| a * b).sum()
    }
}

impl Deref for BasisVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { x })
    }
}

/// Cox–de Boor on the extended knot vector with `order`-fold boundary knots.
/// Fills `out[0..order]` with `B_{l}, …, B_{l+order-1}` and returns `l`, the
/// index of the interval containing `x`.
fn bspline_local(order: usize, grid: &KnotGrid, x: f64, out: &mut [f64]) -> usize {
    let knots = grid.knots();
    let interval = grid.interval(x);
    let degree = order - 1;
    // Extended knot u_i for i in [interval + 1 - degree, interval + degree]
    // maps to knots[clamp(i - degree)].
    let ext = |i: isize| -> f64 {
        let idx = (i - degree as isize).clamp(0, knots.len() as isize - 1);
        knots[idx as usize]
    };
    let span = (interval + degree) as isize;

    let out = &mut out[..order];
    out[0] = 1.0;
    let mut left = [0.0_f64; MAX_ORDER];
    let mut right = [0.0_f64; MAX_ORDER];
    for j in 1..=degree {
        left[j] = x - ext(span + 1 - j as isize);
        right[j] = ext(span + j as isize) - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = out[r] / denom;
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    interval
}

/// B-spline basis vector at `x`.
pub fn eval_bspline(spec: &BasisSpec, x: f64) -> Result<BasisVector> {
    match spec {
        BasisSpec::BSpline { .. } => spec.eval(x),
        _ => Err(Error::InvalidBasis("expected a B-spline spec".into())),
    }
}

fn fourier_into(x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    let mut k = 1;
    while 2 * k <= out.len() {
        let (s, c) = (2.0 * PI * k as f64 * x).sin_cos();
        out[2 * k - 1] = SQRT_2 * c;
        if 2 * k < out.len() {
            out[2 * k] = SQRT_2 * s;
        }
        k += 1;
    }
}

/// Fourier basis vector at `x`.
pub fn eval_fourier(spec: &BasisSpec, x: f64) -> Result<BasisVector> {
    match spec {
        BasisSpec::Fourier { .. } => spec.eval(x),
        _ => Err(Error::InvalidBasis("expected a Fourier spec".into())),
    }
}

fn legendre_into(x: f64, out: &mut [f64]) {
    let u = 2.0 * x - 1.0;
    let (mut prev, mut cur) = (0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            // (k) P_k = (2k - 1) u P_{k-1} - (k - 1) P_{k-2}
            let kf = k as f64;
            let next = ((2.0 * kf - 1.0) * u * cur - (kf - 1.0) * prev) / kf;
            prev = cur;
            cur = next;
        }
        *slot = (2.0 * k as f64 + 1.0).sqrt() * cur;
    }
}

/// Orthonormal shifted-Legendre basis vector at `x`.
pub fn eval_legendre(spec: &BasisSpec, x: f64) -> Result<BasisVector> {
    match spec {
        BasisSpec::Legendre { .. } => spec.eval(x),
        _ => Err(Error::InvalidBasis("expected a Legendre spec".into())),
    }
}

/// Basis vector at `x` for any family.
pub fn eval_basis(spec: &BasisSpec, x: f64) -> Result<BasisVector> {
    spec.eval(x)
}
