use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use torus_geometry::Vector;

use crate::SplittingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    S,
    C,
    U,
}

impl Which {
    pub const ALL: [Which; 3] = [Which::S, Which::C, Which::U];
}

/// Orthonormal bases of `E^s, E^c, E^u` at one point and the oblique
/// projections onto each along the sum of the other two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub basis_s: DMatrix<f64>,
    pub basis_c: DMatrix<f64>,
    pub basis_u: DMatrix<f64>,
    pub proj_s: DMatrix<f64>,
    pub proj_c: DMatrix<f64>,
    pub proj_u: DMatrix<f64>,
}

impl Frame {
    /// Orthonormalize each block and build the projections.
    pub fn from_bases(s: &DMatrix<f64>, c: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<Frame, SplittingError> {
        let d = s.nrows();
        let (s, c, u) = (orthonormalize(s), orthonormalize(c), orthonormalize(u));
        let (ds, dc, du) = (s.ncols(), c.ncols(), u.ncols());
        if ds + dc + du != d {
            return Err(SplittingError::Dimensions { ds, dc, du, d });
        }
        let mut b = DMatrix::zeros(d, d);
        b.columns_mut(0, ds).copy_from(&s);
        b.columns_mut(ds, dc).copy_from(&c);
        b.columns_mut(ds + dc, du).copy_from(&u);
        let binv = b.clone().try_inverse().ok_or(SplittingError::Degenerate)?;
        let block = |basis: &DMatrix<f64>, start: usize, len: usize| -> DMatrix<f64> {
            if len == 0 {
                DMatrix::zeros(d, d)
            } else {
                basis * binv.rows(start, len)
            }
        };
        let proj_s = block(&s, 0, ds);
        let proj_c = block(&c, ds, dc);
        let proj_u = block(&u, ds + dc, du);
        Ok(Frame { basis_s: s, basis_c: c, basis_u: u, proj_s, proj_c, proj_u })
    }

    /// Frame with the given projections; bases are recovered as their ranges.
    pub fn from_projections(
        proj_s: DMatrix<f64>,
        proj_c: DMatrix<f64>,
        proj_u: DMatrix<f64>,
        dims: (usize, usize, usize),
    ) -> Frame {
        Frame {
            basis_s: range(&proj_s, dims.0),
            basis_c: range(&proj_c, dims.1),
            basis_u: range(&proj_u, dims.2),
            proj_s,
            proj_c,
            proj_u,
        }
    }

    pub fn dim(&self) -> usize {
        self.proj_s.nrows()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.basis_s.ncols(), self.basis_c.ncols(), self.basis_u.ncols())
    }

    pub fn projector(&self, which: Which) -> &DMatrix<f64> {
        match which {
            Which::S => &self.proj_s,
            Which::C => &self.proj_c,
            Which::U => &self.proj_u,
        }
    }

    pub fn basis(&self, which: Which) -> &DMatrix<f64> {
        match which {
            Which::S => &self.basis_s,
            Which::C => &self.basis_c,
            Which::U => &self.basis_u,
        }
    }

    pub fn project(&self, which: Which, v: &Vector) -> Vector {
        dynamics_catalog::mat_vec(self.projector(which), v)
    }
}

/// Orthonormal basis of the column span (numerical rank at `1e-10`).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
    let mut out = DMatrix::zeros(m.nrows(), rank);
    // singular values come out unsorted from nalgebra
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    for (k, &j) in order.iter().take(rank).enumerate() {
        out.set_column(k, &u.column(j));
    }
    out
}

/// Top-`k` left singular vectors of `m`.
pub fn range(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    if k == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(m.nrows(), k);
    for (col, &j) in order.iter().take(k).enumerate() {
        out.set_column(col, &u.column(j));
    }
    out
}
