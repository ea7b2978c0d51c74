//! Continuous sections of `TT^d` sampled on periodic grids.
//!
//! A [`Section`] stores one vector per grid node and evaluates off-grid by
//! periodic multilinear interpolation. Norms are taken over nodes. Splitting
//! a section into its center part `u` and hyperbolic part `v` is done
//! pointwise through the oblique projections of a [`Splitting`].

use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splitting::{Splitting, Which};
use thiserror::Error;
use torus_geometry::{Grid, TangentVector, TorusPoint, Vector};

mod io;
mod projectors;

pub use io::{read_binary, write_binary, SectionFile};
pub use projectors::{apply_block, NodeProjectors};

#[derive(Debug, Error)]
pub enum SectionError {
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("component dimension {got} does not match grid dimension {expected}")]
    Components { expected: usize, got: usize },
    #[error("sections live on different grids")]
    GridMismatch,
    #[error("malformed section data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Grid values of a vector field on `T^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    grid: Grid,
    values: Vec<Vector>,
}

/// `ω = u + v` with `u` center-valued and `v` valued in `E^s ⊕ E^u`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSection {
    pub u_part: Section,
    pub v_part: Section,
}

fn check_values(grid: &Grid, values: &[Vector]) -> Result<(), SectionError> {
    if values.len() != grid.len() {
        return Err(SectionError::Length { expected: grid.len(), got: values.len() });
    }
    for (node, v) in values.iter().enumerate() {
        if v.dim() != grid.dim() {
            return Err(SectionError::Components { expected: grid.dim(), got: v.dim() });
        }
        if !v.is_finite() {
            return Err(SectionError::NonFinite { node });
        }
    }
    Ok(())
}

/// Evaluate `generator` at every node.
pub fn sample_section<G>(grid: &Grid, generator: G) -> Result<Section, SectionError>
where
    G: Fn(&TorusPoint) -> Vector + Sync,
{
    let values: Vec<Vector> = (0..grid.len()).into_par_iter().map(|i| generator(&grid.node(i))).collect();
    Section::from_values(grid.clone(), values)
}

impl Section {
    pub fn zeros(grid: &Grid) -> Section {
        Section { values: vec![Vector::zeros(grid.dim()); grid.len()], grid: grid.clone() }
    }

    pub fn constant(grid: &Grid, c: Vector) -> Result<Section, SectionError> {
        Section::from_values(grid.clone(), vec![c; grid.len()])
    }

    pub fn from_values(grid: Grid, values: Vec<Vector>) -> Result<Section, SectionError> {
        check_values(&grid, &values)?;
        Ok(Section { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vector] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vector> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Vector::is_finite)
    }

    /// Interpolated value at `x` as a bare vector.
    pub fn eval_vector(&self, x: &TorusPoint) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (i, w) in self.grid.stencil(x).entries() {
            if w != 0.0 {
                out += self.values[i] * w;
            }
        }
        out
    }

    /// Interpolated value at `x`, based at `x`.
    pub fn eval(&self, x: &TorusPoint) -> TangentVector {
        TangentVector { base: *x, components: self.eval_vector(x) }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.par_iter().map(Vector::norm).reduce(|| 0.0, f64::max)
    }

    /// `‖Π^c s‖ + ‖(Π^s + Π^u) s‖` with sup norms over nodes.
    pub fn norm1(&self, s: &Splitting) -> f64 {
        self.norm1_with(&NodeProjectors::new(s, &self.grid))
    }

    pub fn norm1_with(&self, p: &NodeProjectors) -> f64 {
        let (c, h) = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, v)| {
                let c = p.apply(i, Which::C, v);
                (c.norm(), (*v - c).norm())
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        c + h
    }

    /// Pointwise projection onto one subbundle.
    pub fn project(&self, p: &NodeProjectors, which: Which) -> Section {
        self.map_nodes(|i, _, v| p.apply(i, which, v))
    }

    pub fn split(&self, s: &Splitting) -> SplitSection {
        self.split_with(&NodeProjectors::new(s, &self.grid))
    }

    pub fn split_with(&self, p: &NodeProjectors) -> SplitSection {
        let u_part = self.project(p, Which::C);
        let v_part = self - &u_part;
        SplitSection { u_part, v_part }
    }

    /// New section with `f(node index, node, value)` at each node.
    pub fn map_nodes<F>(&self, f: F) -> Section
    where
        F: Fn(usize, &TorusPoint, &Vector) -> Vector + Sync,
    {
        let values = self.values.par_iter().enumerate().map(|(i, v)| f(i, &self.grid.node(i), v)).collect();
        Section { grid: self.grid.clone(), values }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Section) -> Section {
        assert_eq!(self.grid, other.grid, "sections live on different grids");
        let values = self.values.par_iter().zip(&other.values).map(|(x, y)| *x + *y * a).collect();
        Section { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, a: f64) -> Section {
        let values = self.values.par_iter().map(|x| *x * a).collect();
        Section { grid: self.grid.clone(), values }
    }

    /// Sup-norm distance to another section on the same grid.
    pub fn sup_distance(&self, other: &Section) -> f64 {
        assert_eq!(self.grid, other.grid, "sections live on different grids");
        self.values.par_iter().zip(&other.values).map(|(a, b)| (*a - *b).norm()).reduce(|| 0.0, f64::max)
    }

    /// Values on the nodes of a different grid, by interpolation.
    pub fn resample(&self, grid: &Grid) -> Section {
        let values = (0..grid.len()).into_par_iter().map(|i| self.eval_vector(&grid.node(i))).collect();
        Section { grid: grid.clone(), values }
    }
}

impl SplitSection {
    pub fn combine(&self) -> Section {
        &self.u_part + &self.v_part
    }
}

impl Add for &Section {
    type Output = Section;
    fn add(self, rhs: &Section) -> Section {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Section {
    type Output = Section;
    fn sub(self, rhs: &Section) -> Section {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &Section {
    type Output = Section;
    fn mul(self, a: f64) -> Section {
        self.scale(a)
    }
}

impl Neg for &Section {
    type Output = Section;
    fn neg(self) -> Section {
        self.scale(-1.0)
    }
}

/// `‖w‖ ≤ ε`.
pub fn in_ball(w: &Section, eps: f64) -> bool {
    w.sup_norm() <= eps
}

/// `w ∈ 𝔛^{us}` (center part below `tol` at every node) and `‖w‖ ≤ ε`.
pub fn in_ball_us(w: &Section, p: &NodeProjectors, eps: f64, tol: f64) -> bool {
    let center = w.project(p, Which::C).sup_norm();
    center <= tol && w.sup_norm() <= eps
}

/// `‖w‖₁ ≤ ε`.
pub fn in_ball_1(w: &Section, p: &NodeProjectors, eps: f64) -> bool {
    w.norm1_with(p) <= eps
}

impl Serialize for Section {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        SectionFile::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Section {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let file = SectionFile::deserialize(de)?;
        Section::try_from(file).map_err(serde::de::Error::custom)
    }
}
