//! Regular periodic grids on `T^d` and multilinear interpolation stencils.

use serde::{Deserialize, Serialize};

use crate::{wrap_scalar, GeometryError, TorusPoint, Vector, MAX_DIM};

/// Maximum number of nodes in a multilinear stencil (`2^MAX_DIM`).
pub const MAX_STENCIL: usize = 1 << MAX_DIM;

/// Node `i` along an axis of `n` cells sits at `i / n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    resolution: Vec<usize>,
}

/// Node indices and weights of the periodic multilinear interpolant at a point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub len: usize,
    pub index: [usize; MAX_STENCIL],
    pub weight: [f64; MAX_STENCIL],
}

impl Stencil {
    /// Drop zero-weight entries so node-aligned lookups cost a single read.
    pub fn compact(mut self) -> Self {
        let mut k = 0;
        for i in 0..self.len {
            if self.weight[i] != 0.0 {
                self.index[k] = self.index[i];
                self.weight[k] = self.weight[i];
                k += 1;
            }
        }
        self.len = k;
        self
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |i| (self.index[i], self.weight[i]))
    }
}

impl Grid {
    pub fn new(resolution: &[usize]) -> Result<Self, GeometryError> {
        if resolution.is_empty() || resolution.len() > MAX_DIM {
            return Err(GeometryError::Dimension(resolution.len()));
        }
        if resolution.iter().any(|&n| n == 0) {
            return Err(GeometryError::EmptyAxis);
        }
        Ok(Grid { resolution: resolution.to_vec() })
    }

    /// `n` nodes along each of `dim` axes.
    pub fn uniform(dim: usize, n: usize) -> Result<Self, GeometryError> {
        Grid::new(&vec![n; dim])
    }

    /// 256² for `d = 2`, 64³ for `d = 3`, 16⁴ for `d = 4`.
    pub fn default_for(dim: usize) -> Result<Self, GeometryError> {
        match dim {
            1 => Grid::uniform(1, 1024),
            2 => Grid::uniform(2, 256),
            3 => Grid::uniform(3, 64),
            4 => Grid::uniform(4, 16),
            _ => Err(GeometryError::Dimension(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index of a flat node index (last axis fastest).
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim() {
            flat = flat * self.resolution[a] + multi[a] % self.resolution[a];
        }
        flat
    }

    pub fn node(&self, flat: usize) -> TorusPoint {
        let m = self.multi_index(flat);
        let mut v = Vector::zeros(self.dim());
        for a in 0..self.dim() {
            v[a] = m[a] as f64 / self.resolution[a] as f64;
        }
        TorusPoint::wrapped(v)
    }

    pub fn nodes(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Largest cell edge, `max 1/n_a`.
    pub fn spacing(&self) -> f64 {
        self.resolution.iter().map(|&n| 1.0 / n as f64).fold(0.0, f64::max)
    }

    /// Periodic multilinear stencil at `x`.
    pub fn stencil(&self, x: &TorusPoint) -> Stencil {
        let d = self.dim();
        debug_assert_eq!(x.dim(), d);
        let mut lo = [0usize; MAX_DIM];
        let mut frac = [0f64; MAX_DIM];
        for a in 0..d {
            let n = self.resolution[a];
            let t = wrap_scalar(x[a]) * n as f64;
            let mut i = t.floor() as usize;
            let mut r = t - i as f64;
            if i >= n {
                i = 0;
                r = 0.0;
            }
            lo[a] = i;
            frac[a] = r;
        }
        let len = 1 << d;
        let mut st = Stencil { len, index: [0; MAX_STENCIL], weight: [0.0; MAX_STENCIL] };
        for corner in 0..len {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let n = self.resolution[a];
                let up = (corner >> (d - 1 - a)) & 1 == 1;
                let idx = if up { (lo[a] + 1) % n } else { lo[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                flat = flat * n + idx;
            }
            st.index[corner] = flat;
            st.weight[corner] = w;
        }
        st
    }

    /// Interpolate a scalar field stored at nodes.
    pub fn interpolate_scalar(&self, values: &[f64], x: &TorusPoint) -> f64 {
        self.stencil(x).entries().map(|(i, w)| w * values[i]).sum()
    }

    /// Interpolate a field of `width` components per node into `out`.
    pub fn interpolate_into(&self, values: &[f64], width: usize, x: &TorusPoint, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, w) in self.stencil(x).entries() {
            if w == 0.0 {
                continue;
            }
            let row = &values[i * width..(i + 1) * width];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}
