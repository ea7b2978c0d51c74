use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use torus_geometry::{TorusPoint, Vector};

use crate::CatalogError;

/// Square integer matrix acting on `T^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<i64>,
}

impl IntMatrix {
    /// Build from rows; every row must have the same length as the row count.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, CatalogError> {
        let dim = rows.len();
        if dim == 0 || dim > torus_geometry::MAX_DIM || rows.iter().any(|r| r.len() != dim) {
            return Err(CatalogError::Shape(format!("expected a square matrix, got {rows:?}")));
        }
        Ok(IntMatrix { dim, entries: rows.concat() })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        IntMatrix { dim, entries }
    }

    /// Arnold's cat map `[[2,1],[1,1]]`.
    pub fn cat() -> Self {
        IntMatrix { dim: 2, entries: vec![2, 1, 1, 1] }
    }

    /// Block-diagonal `self ⊕ id_k`.
    pub fn direct_sum_identity(&self, k: usize) -> Self {
        let d = self.dim + k;
        let mut out = IntMatrix::identity(d);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.entries[i * d + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    pub fn to_float(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j) as f64)
    }

    /// Exact determinant by cofactor expansion (dimension at most 4).
    pub fn determinant(&self) -> i64 {
        fn det(m: &[i64], n: usize) -> i64 {
            if n == 1 {
                return m[0];
            }
            let mut total = 0;
            for col in 0..n {
                let mut minor = Vec::with_capacity((n - 1) * (n - 1));
                for r in 1..n {
                    for c in 0..n {
                        if c != col {
                            minor.push(m[r * n + c]);
                        }
                    }
                }
                let sign = if col % 2 == 0 { 1 } else { -1 };
                total += sign * m[col] * det(&minor, n - 1);
            }
            total
        }
        det(&self.entries, self.dim)
    }

    /// Integer inverse; requires `|det| = 1`.
    pub fn inverse(&self) -> Result<IntMatrix, CatalogError> {
        let det = self.determinant();
        if det.abs() != 1 {
            return Err(CatalogError::NotUnimodular(det));
        }
        let inv = self.to_float().try_inverse().ok_or(CatalogError::NotUnimodular(det))?;
        let entries: Vec<i64> =
            (0..self.dim * self.dim).map(|k| inv[(k / self.dim, k % self.dim)].round() as i64).collect();
        let out = IntMatrix { dim: self.dim, entries };
        debug_assert_eq!(self.mul(&out), IntMatrix::identity(self.dim));
        Ok(out)
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        let d = self.dim;
        let mut entries = vec![0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = (0..d).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        IntMatrix { dim: d, entries }
    }

    /// `M^k` for any integer `k`, using the inverse when `k < 0`.
    pub fn pow(&self, k: i64) -> Result<IntMatrix, CatalogError> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut out = IntMatrix::identity(self.dim);
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        Ok(out)
    }

    /// `M v` on vectors of `R^d`.
    #[inline]
    pub fn apply(&self, v: &Vector) -> Vector {
        let d = self.dim;
        let mut out = Vector::zeros(d);
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.entries[i * d + j] as f64 * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// The induced torus automorphism.
    #[inline]
    pub fn act(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::wrapped(self.apply(&x.lift()))
    }
}
