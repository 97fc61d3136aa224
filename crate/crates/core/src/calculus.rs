//! Second-order forward-mode derivative bundles.
//!
//! A [`Jet2`] carries the value, gradient and Hessian of a scalar field at a
//! single point. Every differential operator used by the collocation system
//! needs at most second derivatives, so jets are propagated through sums,
//! products and univariate compositions instead of a general tape.
//!
//! Storage is fixed-size (up to [`MAX_DIM`] coordinates) so jets are `Copy`
//! and never allocate.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

/// Largest supported number of coordinates (space or space-time).
pub const MAX_DIM: usize = 4;

const TRI_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

#[inline]
const fn tri(i: usize, j: usize) -> usize {
    // row-major packing of the upper triangle of a MAX_DIM x MAX_DIM matrix
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * MAX_DIM - i * (i + 1) / 2 + j
}

/// Value, gradient and symmetric Hessian of a scalar field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    dim: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [f64; TRI_LEN],
}

/// Value and first two derivatives of a univariate function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTriple {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

impl ScalarTriple {
    pub const fn new(f: f64, df: f64, d2f: f64) -> Self {
        Self { f, df, d2f }
    }

    pub fn identity(s: f64) -> Self {
        Self::new(s, 1.0, 0.0)
    }

    pub fn tanh(s: f64) -> Self {
        let t = s.tanh();
        let sech2 = 1.0 - t * t;
        Self::new(t, sech2, -2.0 * t * sech2)
    }

    pub fn sin(s: f64) -> Self {
        let (sn, cs) = s.sin_cos();
        Self::new(sn, cs, -sn)
    }

    pub fn cos(s: f64) -> Self {
        let (sn, cs) = s.sin_cos();
        Self::new(cs, -sn, -cs)
    }

    /// `1/s`; caller guarantees `s != 0`.
    pub fn recip(s: f64) -> Self {
        let r = 1.0 / s;
        Self::new(r, -r * r, 2.0 * r * r * r)
    }
}

impl Jet2 {
    /// The zero jet in `dim` coordinates.
    pub fn zero(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "jet dimension {dim} outside 1..={MAX_DIM}");
        Self {
            dim,
            value: 0.0,
            grad: [0.0; MAX_DIM],
            hess: [0.0; TRI_LEN],
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut j = Self::zero(dim);
        j.value = value;
        j
    }

    /// Seeds coordinate `axis` carrying `value`, with `d value / d x_axis = scale`.
    pub fn variable(dim: usize, axis: usize, value: f64, scale: f64) -> Self {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut j = Self::constant(dim, value);
        j.grad[axis] = scale;
        j
    }

    /// Affine jet `value + slope . (x - x0)` (zero Hessian).
    pub fn affine(value: f64, slope: &[f64]) -> Self {
        let mut j = Self::constant(slope.len(), value);
        j.grad[..slope.len()].copy_from_slice(slope);
        j
    }

    /// Builds a jet from explicit derivatives; only the upper triangle of
    /// `hess` is read.
    pub fn from_derivatives(value: f64, grad: &[f64], hess: impl Fn(usize, usize) -> f64) -> Self {
        let mut j = Self::affine(value, grad);
        for a in 0..grad.len() {
            for b in a..grad.len() {
                j.hess[tri(a, b)] = hess(a, b);
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    pub fn grad(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.grad[i]
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.hess[tri(i, j)]
    }

    /// Dense Hessian, reconstructed from the stored triangle.
    pub fn hessian_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.hessian(i, j)).collect())
            .collect()
    }

    /// Trace of the Hessian.
    pub fn laplacian(&self) -> f64 {
        (0..self.dim).map(|i| self.hess[tri(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.value *= c;
        out.grad.iter_mut().for_each(|g| *g *= c);
        out.hess.iter_mut().for_each(|h| *h *= c);
        out
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: f64, other: &Jet2) {
        debug_assert_eq!(self.dim, other.dim);
        self.value += c * other.value;
        for i in 0..MAX_DIM {
            self.grad[i] += c * other.grad[i];
        }
        for k in 0..TRI_LEN {
            self.hess[k] += c * other.hess[k];
        }
    }

    pub fn try_add(&self, other: &Jet2) -> Result<Self, DimensionMismatch> {
        check_dims(self, other)?;
        Ok(*self + *other)
    }

    pub fn try_mul(&self, other: &Jet2) -> Result<Self, DimensionMismatch> {
        check_dims(self, other)?;
        Ok(*self * *other)
    }

    /// Chain rule: `t` must hold `f(self.value)` and its derivatives.
    pub fn compose(&self, t: ScalarTriple) -> Self {
        let mut out = Self::zero(self.dim);
        out.value = t.f;
        for i in 0..self.dim {
            out.grad[i] = t.df * self.grad[i];
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let k = tri(i, j);
                out.hess[k] = t.df * self.hess[k] + t.d2f * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    pub fn tanh(&self) -> Self {
        self.compose(ScalarTriple::tanh(self.value))
    }

    pub fn sin(&self) -> Self {
        self.compose(ScalarTriple::sin(self.value))
    }

    pub fn cos(&self) -> Self {
        self.compose(ScalarTriple::cos(self.value))
    }

    pub fn recip(&self) -> Self {
        self.compose(ScalarTriple::recip(self.value))
    }
}

/// Two jets with different coordinate counts were combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("jet dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

fn check_dims(a: &Jet2, b: &Jet2) -> Result<(), DimensionMismatch> {
    if a.dim == b.dim {
        Ok(())
    } else {
        Err(DimensionMismatch {
            left: a.dim,
            right: b.dim,
        })
    }
}

impl Add for Jet2 {
    type Output = Jet2;

    fn add(mut self, rhs: Jet2) -> Jet2 {
        self += rhs;
        self
    }
}

impl AddAssign for Jet2 {
    fn add_assign(&mut self, rhs: Jet2) {
        debug_assert_eq!(self.dim, rhs.dim);
        self.value += rhs.value;
        for i in 0..MAX_DIM {
            self.grad[i] += rhs.grad[i];
        }
        for k in 0..TRI_LEN {
            self.hess[k] += rhs.hess[k];
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;

    fn sub(self, rhs: Jet2) -> Jet2 {
        self + (-rhs)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;

    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;

    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;

    /// Leibniz rule.
    fn mul(self, b: Jet2) -> Jet2 {
        debug_assert_eq!(self.dim, b.dim);
        let a = self;
        let mut out = Jet2::zero(a.dim);
        out.value = a.value * b.value;
        for i in 0..a.dim {
            out.grad[i] = a.value * b.grad[i] + b.value * a.grad[i];
        }
        for i in 0..a.dim {
            for j in i..a.dim {
                let k = tri(i, j);
                out.hess[k] = (a.value * b.hess[k] + b.value * a.hess[k])
                    + (a.grad[i] * b.grad[j] + b.grad[i] * a.grad[j]);
            }
        }
        out
    }
}

/// A scalar field evaluated as jets, e.g. a right-hand side or a
/// constraint factor.
#[derive(Clone)]
pub struct JetField(Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>);

impl JetField {
    pub fn new(f: impl Fn(&[f64]) -> Jet2 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    /// The field identically equal to `c` in `dim` coordinates.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(move |_| Jet2::constant(dim, c))
    }

    pub fn jet(&self, x: &[f64]) -> Jet2 {
        (self.0)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x).value()
    }
}

impl std::fmt::Debug for JetField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("JetField(..)")
    }
}

/// Coordinate jets `x_0, ..., x_{d-1}` at `x`.
pub fn coordinates(x: &[f64]) -> [Jet2; MAX_DIM] {
    let d = x.len();
    let mut out = [Jet2::zero(d); MAX_DIM];
    for (i, &xi) in x.iter().enumerate() {
        out[i] = Jet2::variable(d, i, xi, 1.0);
    }
    out
}
