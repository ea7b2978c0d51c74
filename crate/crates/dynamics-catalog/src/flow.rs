//! Center flows: the vertical translation flow on product tori and the
//! suspension flow of a hyperbolic toral automorphism.

use serde::{Deserialize, Serialize};
use torus_geometry::{min_image, wrap_scalar, TorusPoint, Vector};

use crate::{base_is_hyperbolic, CatalogError, IntMatrix, Roof};

/// Phase-space metric. Suspensions are glued along the roof by the base
/// automorphism, so distances compare both sides of the seam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Flat,
    Suspension { base: IntMatrix, base_inv: IntMatrix },
}

impl Geometry {
    /// Shortest displacement from `p` to `q`.
    pub fn displacement(&self, p: &TorusPoint, q: &TorusPoint) -> Vector {
        match self {
            Geometry::Flat => p.displacement_to(q),
            Geometry::Suspension { base, base_inv } => {
                let d = p.dim();
                let v = d - 1;
                let qb = Vector::from_slice(&q.coords()[..v]);
                let candidates = [(qb, q[v]), (base.apply(&qb), q[v] - 1.0), (base_inv.apply(&qb), q[v] + 1.0)];
                let mut best = Vector::zeros(d);
                let mut best_norm = f64::INFINITY;
                for (cb, cs) in candidates {
                    let mut w = Vector::zeros(d);
                    for i in 0..v {
                        w[i] = min_image(cb[i] - p[i]);
                    }
                    w[v] = cs - p[v];
                    let n = w.norm();
                    if n < best_norm {
                        best_norm = n;
                        best = w;
                    }
                }
                best
            }
        }
    }

    pub fn dist(&self, p: &TorusPoint, q: &TorusPoint) -> f64 {
        self.displacement(p, q).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FlowKind {
    /// `φ^t(x) = x + t e_d` on `T^d`.
    Vertical { dim: usize },
    /// Suspension over `T²`; the last coordinate is the height divided by the roof.
    Suspension { base: IntMatrix, base_inv: IntMatrix, roof: Roof },
}

/// A flow whose orbits are the center leaves of the catalog models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub kind: FlowKind,
}

impl FlowSpec {
    pub fn vertical(dim: usize) -> Self {
        FlowSpec { kind: FlowKind::Vertical { dim } }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FlowKind::Vertical { dim } => *dim,
            FlowKind::Suspension { .. } => 3,
        }
    }

    pub fn geometry(&self) -> Geometry {
        match &self.kind {
            FlowKind::Vertical { .. } => Geometry::Flat,
            FlowKind::Suspension { base, base_inv, .. } => {
                Geometry::Suspension { base: base.clone(), base_inv: base_inv.clone() }
            }
        }
    }

    /// The generating unit field (vertical on all models).
    pub fn generator(&self, _x: &TorusPoint) -> Vector {
        Vector::axis(self.dim(), self.dim() - 1)
    }

    pub fn roof(&self) -> Option<&Roof> {
        match &self.kind {
            FlowKind::Vertical { .. } => None,
            FlowKind::Suspension { roof, .. } => Some(roof),
        }
    }

    pub fn time_map(&self, p: &TorusPoint, t: f64) -> TorusPoint {
        match &self.kind {
            FlowKind::Vertical { dim } => {
                let mut w = Vector::zeros(*dim);
                w[dim - 1] = t;
                p.translate(&w)
            }
            FlowKind::Suspension { base, base_inv, roof } => {
                let mut x = Vector::from_slice(&p.coords()[..2]);
                let mut r = roof.value(x.as_slice());
                let mut s = p[2] * r + t;
                if roof.is_constant() {
                    let k = (s / r).floor();
                    let a = if k >= 0.0 { base } else { base_inv };
                    for _ in 0..(k.abs() as i64) {
                        x = a.apply(&x);
                    }
                    s -= k * r;
                } else {
                    while s >= r {
                        s -= r;
                        x = base.apply(&x);
                        r = roof.value(&wrap_base(&x));
                    }
                    while s < 0.0 {
                        x = base_inv.apply(&x);
                        r = roof.value(&wrap_base(&x));
                        s += r;
                    }
                }
                let b = wrap_base(&x);
                let sigma = (s / roof.value(&b)).clamp(0.0, 1.0);
                TorusPoint::wrapped(Vector::from_slice(&[b[0], b[1], wrap_scalar(sigma)]))
            }
        }
    }
}

fn wrap_base(x: &Vector) -> [f64; 2] {
    [wrap_scalar(x[0]), wrap_scalar(x[1])]
}

/// Suspension flow of a hyperbolic automorphism of `T²` under `roof`.
pub fn suspension_flow(base: IntMatrix, roof: Roof) -> Result<FlowSpec, CatalogError> {
    if base.dim() != 2 {
        return Err(CatalogError::Shape("suspension base must be 2x2".into()));
    }
    if !base_is_hyperbolic(&base) {
        return Err(CatalogError::NotHyperbolic);
    }
    if !(roof.min_value() > 0.0) {
        return Err(CatalogError::Roof(roof.min_value()));
    }
    let base_inv = base.inverse()?;
    Ok(FlowSpec { kind: FlowKind::Suspension { base, base_inv, roof } })
}
