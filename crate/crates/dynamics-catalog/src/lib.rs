//! Model diffeomorphisms of flat tori: hyperbolic automorphisms, skew
//! products over the cat map, smooth perturbations, and time maps of center
//! flows.

use nalgebra::DMatrix;
use thiserror::Error;
use torus_geometry::{Grid, TorusPoint, Vector};

mod field;
mod flow;
mod map;
mod matrix;

pub use field::{FiberShift, Mode, Roof, VectorField, Wave};
pub use flow::{suspension_flow, FlowKind, FlowSpec, Geometry};
pub use map::{make_flow_time, make_linear_ph, make_perturbed, make_skew_product, MapKind, MapSpec};
pub use matrix::IntMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("determinant {0} is not ±1; the matrix does not define a torus diffeomorphism")]
    NotUnimodular(i64),
    #[error("base matrix has an eigenvalue on the unit circle")]
    NotHyperbolic,
    #[error("Jacobian of the perturbation degenerates on the sample grid (det {0:.3e})")]
    SingularJacobian(f64),
    #[error("roof must be positive, minimum is {0}")]
    Roof(f64),
    #[error("{0}")]
    Shape(String),
}

/// `M v` for a dense matrix.
#[inline]
pub fn mat_vec(m: &DMatrix<f64>, v: &Vector) -> Vector {
    let mut out = Vector::zeros(m.nrows());
    for i in 0..m.nrows() {
        let mut s = 0.0;
        for j in 0..m.ncols() {
            s += m[(i, j)] * v[j];
        }
        out[i] = s;
    }
    out
}

/// No eigenvalue of modulus one.
pub fn base_is_hyperbolic(m: &IntMatrix) -> bool {
    m.to_float().complex_eigenvalues().iter().all(|l| (l.norm() - 1.0).abs() > 1e-9)
}

fn distance_sample(dim: usize) -> Grid {
    let n = match dim {
        1 | 2 => 96,
        3 => 32,
        _ => 12,
    };
    Grid::uniform(dim, n).expect("valid sample grid")
}

/// Nodes of the sample grid shifted off the lattice so linear maps do not
/// send every sample to a node.
fn distance_points(dim: usize) -> impl Iterator<Item = TorusPoint> {
    let grid = distance_sample(dim);
    let shift = Vector::from_slice(&[0.3719, 0.1237, 0.2591, 0.4411][..dim]) * grid.spacing();
    (0..grid.len()).map(move |i| grid.node(i).translate(&shift))
}

/// `sup_x d(f(x), g(x))` over a dense sample.
pub fn c0_distance(f: &MapSpec, g: &MapSpec) -> f64 {
    let geom = f.geometry();
    distance_points(f.dim()).map(|x| geom.dist(&f.forward(&x), &g.forward(&x))).fold(0.0, f64::max)
}

/// `c0_distance` plus `sup_x ‖Df(x) − Dg(x)‖` (operator norm).
pub fn c1_distance(f: &MapSpec, g: &MapSpec) -> f64 {
    let d1 =
        distance_points(f.dim()).map(|x| operator_norm(&(f.differential(&x) - g.differential(&x)))).fold(0.0, f64::max);
    c0_distance(f, g) + d1
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}
