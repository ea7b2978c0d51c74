use nalgebra::DMatrix;
use rayon::prelude::*;
use section_space::apply_block;
use torus_geometry::{Grid, TorusPoint, Vector, MAX_DIM};

/// Row-major `d×d` matrix padded to `MAX_DIM×MAX_DIM`.
pub(crate) type Mat = [f64; MAX_DIM * MAX_DIM];

pub(crate) fn to_mat(m: &DMatrix<f64>) -> Mat {
    let mut out = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * MAX_DIM + j] = m[(i, j)];
        }
    }
    out
}

pub(crate) fn to_dmatrix(m: &Mat, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| m[i * MAX_DIM + j])
}

/// A matrix per grid node, stored once when it does not vary.
#[derive(Clone, Debug)]
pub(crate) enum MatField {
    Identity,
    Constant(Box<Mat>),
    PerNode(Vec<Mat>),
}

impl MatField {
    pub(crate) fn build<F>(n: usize, constant: bool, f: F) -> MatField
    where
        F: Fn(usize) -> DMatrix<f64> + Sync,
    {
        if constant {
            MatField::Constant(Box::new(to_mat(&f(0))))
        } else {
            MatField::PerNode((0..n).into_par_iter().map(|i| to_mat(&f(i))).collect())
        }
    }

    pub(crate) fn apply(&self, i: usize, d: usize, v: &Vector) -> Vector {
        match self {
            MatField::Identity => *v,
            MatField::Constant(m) => apply_block(m, d, v),
            MatField::PerNode(ms) => apply_block(&ms[i], d, v),
        }
    }

    pub(crate) fn matrix(&self, i: usize, d: usize) -> DMatrix<f64> {
        match self {
            MatField::Identity => DMatrix::identity(d, d),
            MatField::Constant(m) => to_dmatrix(m, d),
            MatField::PerNode(ms) => to_dmatrix(&ms[i], d),
        }
    }

    pub(crate) fn is_per_node(&self) -> bool {
        matches!(self, MatField::PerNode(_))
    }
}

/// Interpolation stencils of one grid at a list of points, packed with a
/// fixed stride.
#[derive(Clone, Debug)]
pub(crate) struct Sampler {
    stride: usize,
    index: Vec<u32>,
    weight: Vec<f64>,
}

impl Sampler {
    pub(crate) fn new(grid: &Grid, points: &[TorusPoint]) -> Sampler {
        let stencils: Vec<_> = points.par_iter().map(|p| grid.stencil(p).compact()).collect();
        let stride = stencils.iter().map(|s| s.len).max().unwrap_or(1).max(1);
        let mut index = vec![0u32; stride * points.len()];
        let mut weight = vec![0.0; stride * points.len()];
        for (k, s) in stencils.iter().enumerate() {
            for j in 0..s.len {
                index[k * stride + j] = s.index[j] as u32;
                weight[k * stride + j] = s.weight[j];
            }
        }
        Sampler { stride, index, weight }
    }

    pub(crate) fn gather(&self, values: &[Vector], k: usize) -> Vector {
        let base = k * self.stride;
        let mut out = values[self.index[base] as usize] * self.weight[base];
        for j in 1..self.stride {
            let w = self.weight[base + j];
            if w != 0.0 {
                out += values[self.index[base + j] as usize] * w;
            }
        }
        out
    }
}
