//! Quasi-conjugacies between a partially hyperbolic map `f` and a nearby
//! map `g`, found as the fixed point of a contraction on sections.
//!
//! The unknown is a section `ω = u + v` with `u` in the center bundle and
//! `v` in `E^s ⊕ E^u`. With `h = g ∘ f⁻¹`, the map
//! `Φ(ω) = P⁻¹ J⁻¹ (η(v) − θ(v))` contracts a small ball, and its fixed
//! point gives `π(x) = x + v(x)` with `π ∘ g = τ ∘ f ∘ π`, where `τ` moves
//! points along center directions only.
//!
//! Three variants differ in how `τ` is represented:
//!
//! * [`solve_theorem_A`]: `τ_x(y) = y + u(x)` for a center section `u`.
//! * [`solve_theorem_Bprime`]: `τ_x(y) = φ^{τ̃(x)}(y)` for a center flow `φ`.
//! * [`solve_theorem_B_transversal`]: `τ_x(y)` slides `y` along the center
//!   leaf onto the hyperbolic plane through `x`.
//!
//! Operators act on grid sections; off-grid values come from periodic
//! multilinear interpolation.

use dynamics_catalog::MapSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use torus_geometry::{TorusPoint, Vector};

mod field;
mod guard;
mod ops;
mod random;
mod solve;
mod verify;

pub use guard::{measure_c_eps, measure_k_h, GuardReport};
pub use ops::{
    op_F, op_Jh, op_Jh_inverse, op_Ph, op_Ph_inverse, op_Phi, op_beta, op_eta, op_thetah, BlockRates, Operators,
};
pub use random::random_section;
pub use solve::{
    solve_theorem_A, solve_theorem_A_from, solve_theorem_B_transversal, solve_theorem_Bprime, QuasiConjugacy,
    SolutionReport, Variant,
};
pub use verify::{
    empirical_contraction, pi_refined, verify_leaf_conjugacy, verify_quasi_conjugacy, ContractionReport, LeafReport,
    ResidualStats, VerificationReport,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("point moved {0:.4} along a section, beyond the injectivity radius")]
    Injectivity(f64),
    #[error("contraction guard failed: {0}")]
    Guard(String),
    #[error("no convergence after {iterations} iterations (last step {last:.3e})")]
    NoConvergence { iterations: usize, last: f64, trace: Vec<f64> },
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Splitting(#[from] splitting::SplittingError),
    #[error(transparent)]
    Section(#[from] section_space::SectionError),
    #[error(transparent)]
    Geometry(#[from] torus_geometry::GeometryError),
}

/// Truncation rule for the Neumann series of `P⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeumannDepth {
    /// Stop once the geometric tail bound drops below `neumann_tol`.
    Auto,
    /// Sum exactly this many terms past the leading one.
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Radius of the ball `‖ω‖₁ ≤ ε`.
    pub epsilon: f64,
    /// Grid sizes per axis; `None` picks the default for the dimension.
    pub resolution: Option<Vec<usize>>,
    pub fixpoint_tol: f64,
    pub max_iterations: usize,
    pub neumann_depth: NeumannDepth,
    pub neumann_tol: f64,
    pub residual_sample_count: usize,
    pub residual_tol: f64,
    /// Allowed residual of the plainly interpolated `π`.
    pub interpolation_tol: f64,
    /// Orbit length used to sharpen `π` off the grid; 0 disables it.
    pub refine_steps: usize,
    pub guard_samples: usize,
    /// Refuse to iterate when the measured contraction guard fails.
    pub enforce_guard: bool,
    /// Orbit length for splittings that have to be estimated.
    pub orbit_length: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            epsilon: 0.45,
            resolution: None,
            fixpoint_tol: 1e-10,
            max_iterations: 200,
            neumann_depth: NeumannDepth::Auto,
            neumann_tol: 1e-12,
            residual_sample_count: 10_000,
            residual_tol: 1e-6,
            interpolation_tol: 1e-3,
            refine_steps: 16,
            guard_samples: 10_000,
            enforce_guard: true,
            orbit_length: splitting::DEFAULT_ORBIT_LENGTH,
            seed: 42,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(SolverError::Params(format!("epsilon {} not in (0, 1/2)", self.epsilon)));
        }
        if !(self.fixpoint_tol > 0.0 && self.neumann_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(SolverError::Params("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::Params("max_iterations must be positive".into()));
        }
        if let Some(r) = &self.resolution {
            if r.iter().any(|&n| n < 2) {
                return Err(SolverError::Params(format!("resolution {r:?} too coarse")));
            }
        }
        Ok(())
    }

    pub fn grid(&self, dim: usize) -> Result<torus_geometry::Grid, SolverError> {
        let grid = match &self.resolution {
            Some(r) => {
                if r.len() != dim {
                    return Err(SolverError::Params(format!("resolution {r:?} for a {dim}-torus")));
                }
                torus_geometry::Grid::new(r)?
            }
            None => torus_geometry::Grid::default_for(dim)?,
        };
        Ok(grid)
    }
}

/// An invertible self-map of the torus, given pointwise.
pub trait PointMap: Sync {
    fn dim(&self) -> usize;
    fn forward(&self, x: &TorusPoint) -> TorusPoint;
    fn inverse(&self, y: &TorusPoint) -> TorusPoint;
}

impl PointMap for MapSpec {
    fn dim(&self) -> usize {
        MapSpec::dim(self)
    }
    fn forward(&self, x: &TorusPoint) -> TorusPoint {
        MapSpec::forward(self, x)
    }
    fn inverse(&self, y: &TorusPoint) -> TorusPoint {
        MapSpec::inverse(self, y)
    }
}

/// `h = outer ∘ inner⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct Composite<'a> {
    pub outer: &'a MapSpec,
    pub inner: &'a MapSpec,
}

impl<'a> Composite<'a> {
    /// `g ∘ f⁻¹`.
    pub fn new(g: &'a MapSpec, f: &'a MapSpec) -> Self {
        Composite { outer: g, inner: f }
    }
}

impl PointMap for Composite<'_> {
    fn dim(&self) -> usize {
        self.outer.dim()
    }
    fn forward(&self, x: &TorusPoint) -> TorusPoint {
        self.outer.forward(&self.inner.inverse(x))
    }
    fn inverse(&self, y: &TorusPoint) -> TorusPoint {
        self.inner.forward(&self.outer.inverse(y))
    }
}

/// `x ↦ x + shift`.
#[derive(Clone, Copy, Debug)]
pub struct Translation {
    pub shift: Vector,
}

impl Translation {
    pub fn identity(dim: usize) -> Self {
        Translation { shift: Vector::zeros(dim) }
    }
}

impl PointMap for Translation {
    fn dim(&self) -> usize {
        self.shift.dim()
    }
    fn forward(&self, x: &TorusPoint) -> TorusPoint {
        x.translate(&self.shift)
    }
    fn inverse(&self, y: &TorusPoint) -> TorusPoint {
        y.translate(&-self.shift)
    }
}
