//! Geometry of the unit flat torus `T^d = R^d / Z^d`.
//!
//! Points carry coordinates in `[0, 1)`. Tangent spaces are trivialized, so a
//! tangent vector is a base point plus `d` real components. The exponential
//! map is translation and is injective on the open ball of radius 1/2.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub mod grid;
pub use grid::{Grid, Stencil};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 4;

/// Injectivity radius of the exponential map on the unit flat torus.
pub const INJECTIVITY_RADIUS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("vector of norm {0} exceeds the injectivity radius 1/2")]
    Injectivity(f64),
    #[error("grid axis with zero nodes")]
    EmptyAxis,
}

/// Reduce a real number to `[0, 1)`.
#[inline]
pub fn wrap_scalar(t: f64) -> f64 {
    let r = t - t.floor();
    // tiny negative inputs round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Shortest signed representative of `t` modulo 1, in `[-1/2, 1/2)`.
#[inline]
pub fn min_image(t: f64) -> f64 {
    let r = t - (t + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// A vector in `R^d`, stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Vector { dim, c: [0.0; MAX_DIM] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut out = Vector::zeros(v.len());
        out.c[..v.len()].copy_from_slice(v);
        out
    }

    /// Unit vector along axis `i`.
    pub fn axis(dim: usize, i: usize) -> Self {
        let mut out = Vector::zeros(dim);
        out.c[i] = 1.0;
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.c[i] * other.c[i];
        }
        s
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    /// Componentwise reduction to the shortest representative mod 1.
    pub fn min_image(&self) -> Vector {
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] = min_image(self.c[i]);
        }
        out
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(mut self, rhs: Vector) -> Vector {
        self += rhs;
        self
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.c[i] += rhs.c[i];
        }
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(mut self, rhs: Vector) -> Vector {
        self -= rhs;
        self
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, rhs: Vector) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.c[i] -= rhs.c[i];
        }
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(mut self, k: f64) -> Vector {
        for i in 0..self.dim {
            self.c[i] *= k;
        }
        self
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(GeometryError::Dimension(v.len())));
        }
        Ok(Vector::from_slice(&v))
    }
}

/// A point of `T^d` with every coordinate in `[0, 1)`.
#[derive(Clone, Copy, PartialEq)]
pub struct TorusPoint {
    v: Vector,
}

impl TorusPoint {
    pub fn origin(dim: usize) -> Self {
        TorusPoint { v: Vector::zeros(dim) }
    }

    /// Wrap arbitrary finite reals onto the torus.
    pub fn new(raw: &[f64]) -> Result<Self, GeometryError> {
        wrap(raw)
    }

    /// Wrap without a finiteness check; callers guarantee finite input.
    #[inline]
    pub fn wrapped(raw: Vector) -> Self {
        let mut v = raw;
        for x in v.as_mut_slice() {
            *x = wrap_scalar(*x);
        }
        TorusPoint { v }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.v.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        self.v.as_slice()
    }

    /// Coordinates as a vector of `R^d` (the representative in `[0,1)^d`).
    #[inline]
    pub fn lift(&self) -> Vector {
        self.v
    }

    /// Translate by `w` without the injectivity check.
    #[inline]
    pub fn translate(&self, w: &Vector) -> TorusPoint {
        TorusPoint::wrapped(self.v + *w)
    }

    /// Shortest vector `w` with `self + w = q` mod 1.
    #[inline]
    pub fn displacement_to(&self, q: &TorusPoint) -> Vector {
        (q.v - self.v).min_image()
    }
}

impl Index<usize> for TorusPoint {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.v[i]
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusPoint{:?}", self.v)
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vector::deserialize(d)?;
        wrap(v.as_slice()).map_err(serde::de::Error::custom)
    }
}

/// A tangent vector at `base`, in the canonical trivialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: TorusPoint,
    pub components: Vector,
}

impl TangentVector {
    pub fn new(base: TorusPoint, components: Vector) -> Result<Self, GeometryError> {
        if base.dim() != components.dim() {
            return Err(GeometryError::Mismatch(base.dim(), components.dim()));
        }
        Ok(TangentVector { base, components })
    }

    pub fn zero(base: TorusPoint) -> Self {
        TangentVector { base, components: Vector::zeros(base.dim()) }
    }

    pub fn norm(&self) -> f64 {
        self.components.norm()
    }
}

/// Reduce each coordinate mod 1.
pub fn wrap(raw: &[f64]) -> Result<TorusPoint, GeometryError> {
    if raw.is_empty() || raw.len() > MAX_DIM {
        return Err(GeometryError::Dimension(raw.len()));
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(GeometryError::NonFinite { index, value });
    }
    Ok(TorusPoint::wrapped(Vector::from_slice(raw)))
}

/// Length of the shortest representative of `q - p`.
#[inline]
pub fn dist(p: &TorusPoint, q: &TorusPoint) -> f64 {
    p.displacement_to(q).norm()
}

/// `exp_x(v)`, defined for `|v| < 1/2`.
pub fn exp_map(x: &TorusPoint, v: &TangentVector) -> Result<TorusPoint, GeometryError> {
    if v.base.dim() != x.dim() {
        return Err(GeometryError::Mismatch(x.dim(), v.base.dim()));
    }
    let n = v.norm();
    if !(n < INJECTIVITY_RADIUS) {
        return Err(GeometryError::Injectivity(n));
    }
    Ok(x.translate(&v.components))
}

/// `exp_x^{-1}(y)`, defined for `d(x, y) < 1/2`.
pub fn exp_inv(x: &TorusPoint, y: &TorusPoint) -> Result<TangentVector, GeometryError> {
    if x.dim() != y.dim() {
        return Err(GeometryError::Mismatch(x.dim(), y.dim()));
    }
    let w = x.displacement_to(y);
    let n = w.norm();
    if !(n < INJECTIVITY_RADIUS) {
        return Err(GeometryError::Injectivity(n));
    }
    Ok(TangentVector { base: *x, components: w })
}
