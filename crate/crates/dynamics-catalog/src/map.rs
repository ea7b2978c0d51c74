use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use torus_geometry::{wrap_scalar, Grid, TorusPoint, Vector};

use crate::{
    base_is_hyperbolic, mat_vec, CatalogError, FiberShift, FlowKind, FlowSpec, Geometry, IntMatrix, VectorField,
};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_STEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Linear,
    SkewProduct,
    Perturbed,
    FlowTime,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Repr {
    Linear { m: IntMatrix, inv: IntMatrix },
    Skew { base: IntMatrix, base_inv: IntMatrix, shift: FiberShift },
    Perturbed { f: Box<MapSpec>, field: VectorField, amplitude: f64 },
    FlowTime { flow: FlowSpec, t: f64 },
}

/// A diffeomorphism of `T^d` (or of a suspension drawn in `T³` coordinates).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapSpec {
    repr: Repr,
    dim: usize,
    center_dimension: usize,
}

/// Toral automorphism `x ↦ M x`.
pub fn make_linear_ph(m: IntMatrix) -> Result<MapSpec, CatalogError> {
    let inv = m.inverse()?;
    let dim = m.dim();
    let center_dimension = m.to_float().complex_eigenvalues().iter().filter(|l| (l.norm() - 1.0).abs() < 1e-9).count();
    Ok(MapSpec { repr: Repr::Linear { m, inv }, dim, center_dimension })
}

/// `(x, s) ↦ (B x, s + shift(x))` on `T² × S¹`.
pub fn make_skew_product(base: IntMatrix, shift: FiberShift) -> Result<MapSpec, CatalogError> {
    if base.dim() != 2 {
        return Err(CatalogError::Shape("skew product base must be 2x2".into()));
    }
    let base_inv = base.inverse()?;
    if !base_is_hyperbolic(&base) {
        return Err(CatalogError::NotHyperbolic);
    }
    if let Some(axis) = shift.axis() {
        if axis >= 2 {
            return Err(CatalogError::Shape(format!("fiber shift axis {axis} is not a base axis")));
        }
    }
    Ok(MapSpec { repr: Repr::Skew { base, base_inv, shift }, dim: 3, center_dimension: 1 })
}

/// `g(x) = exp_{f(x)}(a · field(f(x)))`.
pub fn make_perturbed(f: MapSpec, field: VectorField, amplitude: f64) -> Result<MapSpec, CatalogError> {
    if field.dim != f.dim {
        return Err(CatalogError::Shape(format!("field of dimension {} on a map of dimension {}", field.dim, f.dim)));
    }
    if !amplitude.is_finite() {
        return Err(CatalogError::Shape(format!("amplitude {amplitude}")));
    }
    // h = id + a·field must stay a local diffeomorphism with constant orientation
    let grid = Grid::uniform(f.dim, jacobian_sample_size(f.dim)).expect("valid sample grid");
    let mut min_det = f64::INFINITY;
    let mut max_det = f64::NEG_INFINITY;
    for z in grid.nodes() {
        let j = DMatrix::identity(f.dim, f.dim) + field.jacobian(&z) * amplitude;
        let det = j.determinant();
        min_det = min_det.min(det);
        max_det = max_det.max(det);
    }
    if min_det <= 1e-8 && max_det >= -1e-8 {
        return Err(CatalogError::SingularJacobian(min_det));
    }
    let dim = f.dim;
    let center_dimension = f.center_dimension;
    Ok(MapSpec { repr: Repr::Perturbed { f: Box::new(f), field, amplitude }, dim, center_dimension })
}

/// The time-`t` map of a center flow.
pub fn make_flow_time(flow: FlowSpec, t: f64) -> MapSpec {
    let dim = flow.dim();
    MapSpec { repr: Repr::FlowTime { flow, t }, dim, center_dimension: 1 }
}

fn jacobian_sample_size(dim: usize) -> usize {
    match dim {
        1 | 2 => 64,
        3 => 24,
        _ => 10,
    }
}

impl MapSpec {
    pub fn kind(&self) -> MapKind {
        match self.repr {
            Repr::Linear { .. } => MapKind::Linear,
            Repr::Skew { .. } => MapKind::SkewProduct,
            Repr::Perturbed { .. } => MapKind::Perturbed,
            Repr::FlowTime { .. } => MapKind::FlowTime,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center_dimension(&self) -> usize {
        self.center_dimension
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.repr, Repr::Linear { .. })
    }

    pub fn geometry(&self) -> Geometry {
        match &self.repr {
            Repr::FlowTime { flow, .. } => flow.geometry(),
            Repr::Perturbed { f, .. } => f.geometry(),
            _ => Geometry::Flat,
        }
    }

    /// The underlying unperturbed map of a perturbation.
    pub fn unperturbed(&self) -> &MapSpec {
        match &self.repr {
            Repr::Perturbed { f, .. } => f.unperturbed(),
            _ => self,
        }
    }

    /// `(field, amplitude)` of the outermost perturbation.
    pub fn perturbation(&self) -> Option<(&VectorField, f64)> {
        match &self.repr {
            Repr::Perturbed { field, amplitude, .. } => Some((field, *amplitude)),
            _ => None,
        }
    }

    /// The integer matrix of `Df` when it is the same at every point.
    pub fn constant_differential(&self) -> Option<IntMatrix> {
        match &self.repr {
            Repr::Linear { m, .. } => Some(m.clone()),
            Repr::Skew { base, shift: FiberShift::Constant { .. }, .. } => Some(base.direct_sum_identity(1)),
            Repr::Skew { .. } => None,
            Repr::Perturbed { f, field, amplitude } => {
                if *amplitude == 0.0 || field.modes.is_empty() {
                    f.constant_differential()
                } else {
                    None
                }
            }
            Repr::FlowTime { flow, t } => match &flow.kind {
                FlowKind::Vertical { dim } => Some(IntMatrix::identity(*dim)),
                FlowKind::Suspension { base, roof, .. } => match roof {
                    crate::Roof::Constant { value } if (t / value).fract() == 0.0 => {
                        base.pow((t / value) as i64).ok().map(|b| b.direct_sum_identity(1))
                    }
                    _ => None,
                },
            },
        }
    }

    pub fn forward(&self, x: &TorusPoint) -> TorusPoint {
        match &self.repr {
            Repr::Linear { m, .. } => m.act(x),
            Repr::Skew { base, shift, .. } => {
                let b = [x[0], x[1]];
                let fb = base.apply(&Vector::from_slice(&b));
                let s = x[2] + shift.value(&b);
                TorusPoint::wrapped(Vector::from_slice(&[fb[0], fb[1], s]))
            }
            Repr::Perturbed { f, field, amplitude } => {
                let z = f.forward(x);
                z.translate(&(field.value(&z) * *amplitude))
            }
            Repr::FlowTime { flow, t } => flow.time_map(x, *t),
        }
    }

    pub fn inverse(&self, y: &TorusPoint) -> TorusPoint {
        match &self.repr {
            Repr::Linear { inv, .. } => inv.act(y),
            Repr::Skew { base_inv, shift, .. } => {
                let b = base_inv.apply(&Vector::from_slice(&[y[0], y[1]]));
                let b = [wrap_scalar(b[0]), wrap_scalar(b[1])];
                let s = y[2] - shift.value(&b);
                TorusPoint::wrapped(Vector::from_slice(&[b[0], b[1], s]))
            }
            Repr::Perturbed { f, field, amplitude } => {
                let z = invert_displacement(field, *amplitude, y);
                f.inverse(&z)
            }
            Repr::FlowTime { flow, t } => flow.time_map(y, -*t),
        }
    }

    pub fn differential(&self, x: &TorusPoint) -> DMatrix<f64> {
        match &self.repr {
            Repr::Linear { m, .. } => m.to_float(),
            Repr::Skew { base, shift, .. } => {
                let mut d = DMatrix::identity(3, 3);
                for i in 0..2 {
                    for j in 0..2 {
                        d[(i, j)] = base.get(i, j) as f64;
                    }
                }
                let b = [x[0], x[1]];
                d[(2, 0)] = shift.partial(&b, 0);
                d[(2, 1)] = shift.partial(&b, 1);
                d
            }
            Repr::Perturbed { f, field, amplitude } => {
                let z = f.forward(x);
                let dh = DMatrix::identity(self.dim, self.dim) + field.jacobian(&z) * *amplitude;
                dh * f.differential(x)
            }
            Repr::FlowTime { flow, t } => match &flow.kind {
                FlowKind::Vertical { dim } => DMatrix::identity(*dim, *dim),
                FlowKind::Suspension { base, roof: crate::Roof::Constant { value }, .. } => {
                    let k = ((x[2] * value + t) / value).floor() as i64;
                    base.pow(k).expect("unimodular base").direct_sum_identity(1).to_float()
                }
                FlowKind::Suspension { .. } => self.differential_by_differences(x),
            },
        }
    }

    /// Central differences through the phase-space metric.
    fn differential_by_differences(&self, x: &TorusPoint) -> DMatrix<f64> {
        let h = 1e-6;
        let geom = self.geometry();
        let fx = self.forward(x);
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let e = Vector::axis(self.dim, j) * h;
            let plus = geom.displacement(&fx, &self.forward(&x.translate(&e)));
            let minus = geom.displacement(&fx, &self.forward(&x.translate(&-e)));
            for i in 0..self.dim {
                d[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        d
    }

    /// `Df(x) v`.
    pub fn push(&self, x: &TorusPoint, v: &Vector) -> Vector {
        mat_vec(&self.differential(x), v)
    }
}

/// Solve `z + a·field(z) = y` by damped Newton seeded at `z = y`.
fn invert_displacement(field: &VectorField, a: f64, y: &TorusPoint) -> TorusPoint {
    let dim = y.dim();
    let residual = |w: &Vector| *w + field.value(&y.translate(w)) * a;
    let mut w = Vector::zeros(dim);
    let mut r = residual(&w);
    for _ in 0..NEWTON_MAX_STEPS {
        if r.norm() < NEWTON_TOL {
            break;
        }
        let j = DMatrix::identity(dim, dim) + field.jacobian(&y.translate(&w)) * a;
        let rhs = nalgebra::DVector::from_column_slice(r.as_slice());
        let Some(step) = j.lu().solve(&rhs) else { break };
        let step = Vector::from_slice(step.as_slice());
        let mut damp = 1.0;
        loop {
            let cand = w - step * damp;
            let rc = residual(&cand);
            if rc.norm() < r.norm() || damp < 1e-4 {
                w = cand;
                r = rc;
                break;
            }
            damp *= 0.5;
        }
    }
    y.translate(&w)
}
