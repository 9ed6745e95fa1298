//! Inverse multiquadric base kernel and the Langevin Stein kernel built on it.
//!
//! The base kernel is fixed to `k(x, y) = (1 + |x - y|^2)^(-1/2)` with unit
//! bandwidth. Given a score function `s = grad log p`, the Stein kernel is
//!
//! ```text
//! h(x, y) = <s(x), s(y)> k(x, y) + <s(y), grad_x k(x, y)>
//!         + <s(x), grad_y k(x, y)> + div_x div_y k(x, y)
//! ```
//!
//! and is evaluated term by term in `O(d)`. Everything here is a pure
//! function; callers that evaluate the same point repeatedly should cache
//! scores and use [`stein_from_scores`].

use crate::error::{check_dim, Error, Result};
use crate::models::ScoreModel;

/// A sample coordinate vector with all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Point(coords))
        } else {
            Err(Error::NonFinite("point coordinates"))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `(1 + |x - y|^2)^(-1/2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImqKernel;

impl ImqKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        Ok((1.0 + sq_dist(x, y)).sqrt().recip())
    }

    /// Gradient in the first argument: `-(1 + r^2)^(-3/2) (x - y)`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), y.len())?;
        let u = 1.0 + sq_dist(x, y);
        let k3 = (u * u * u).sqrt().recip();
        Ok(x.iter().zip(y).map(|(a, b)| -k3 * (a - b)).collect())
    }

    /// Trace of the mixed Hessian, `div_x div_y k`:
    /// `-3 r^2 (1 + r^2)^(-5/2) + d (1 + r^2)^(-3/2)`.
    pub fn cross_divergence(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        let r2 = sq_dist(x, y);
        let u = 1.0 + r2;
        let k3 = (u * u * u).sqrt().recip();
        Ok(-3.0 * r2 * k3 / u + x.len() as f64 * k3)
    }
}

/// Stein kernel value from points and their precomputed scores.
///
/// No dimension checks; all four slices must have equal length.
#[inline]
pub fn stein_from_scores(x: &[f64], sx: &[f64], y: &[f64], sy: &[f64]) -> f64 {
    let d = x.len();
    debug_assert!(sx.len() == d && y.len() == d && sy.len() == d);
    let mut r2 = 0.0;
    let mut ss = 0.0;
    // <s(x) - s(y), x - y>
    let mut sdiff = 0.0;
    for i in 0..d {
        let diff = x[i] - y[i];
        r2 += diff * diff;
        ss += sx[i] * sy[i];
        sdiff += (sx[i] - sy[i]) * diff;
    }
    let u = 1.0 + r2;
    let k = u.sqrt().recip();
    let k3 = k / u;
    let k5 = k3 / u;
    ss * k + k3 * sdiff - 3.0 * r2 * k5 + d as f64 * k3
}

/// Base kernel paired with a target's score function.
#[derive(Clone, Copy)]
pub struct SteinKernel<'a> {
    model: &'a dyn ScoreModel,
    base: ImqKernel,
}

impl<'a> SteinKernel<'a> {
    pub fn new(model: &'a dyn ScoreModel) -> Self {
        SteinKernel { model, base: ImqKernel }
    }

    pub fn base(&self) -> ImqKernel {
        self.base
    }

    pub fn model(&self) -> &'a dyn ScoreModel {
        self.model
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.model.dim();
        check_dim(d, x.len())?;
        check_dim(d, y.len())?;
        let sx = self.model.score(x)?;
        let sy = self.model.score(y)?;
        Ok(stein_from_scores(x, &sx, y, &sy))
    }
}

/// Convenience wrapper around [`SteinKernel::eval`].
pub fn stein_eval(model: &dyn ScoreModel, x: &[f64], y: &[f64]) -> Result<f64> {
    SteinKernel::new(model).eval(x, y)
}
