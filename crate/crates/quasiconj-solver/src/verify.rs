//! Residual checks for solved quasi-conjugacies, the leaf-conjugacy check
//! and the empirical contraction constant of `Φ_h`.
//!
//! Off-grid, `π` is evaluated either from the interpolated `v` or from a
//! sharpened value: the unstable part of `v(x)` is pulled back along
//! `g^n(x), …, x` through the conjugacy equation, and the stable part is
//! pushed forward along `g^{-n}(x), …, x`. Interpolation errors in each
//! component are then damped by the hyperbolic rates.

use dynamics_catalog::{mat_vec, MapSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use section_space::{NodeProjectors, Section};
use serde::{Deserialize, Serialize};
use splitting::{estimate_frame_at, Splitting, Which};
use torus_geometry::{Grid, TorusPoint, Vector, INJECTIVITY_RADIUS};

use crate::ops::Operators;
use crate::random::random_section;
use crate::solve::{QuasiConjugacy, Variant};
use crate::{PointMap, SolverError, SolverParams};

/// Tolerance on the center part of `exp_x⁻¹ π(x)` at nodes.
pub const CENTER_TOL: f64 = 1e-10;
/// At most this many nodes enter the sharpened residual.
const REFINED_NODE_BUDGET: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub sup: f64,
    pub mean: f64,
    pub count: usize,
}

impl ResidualStats {
    fn from(values: &[f64]) -> Self {
        let sup = values.iter().cloned().fold(0.0, f64::max);
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        ResidualStats { sup, mean, count: values.len() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Residual with `π` from the interpolated `v`, over nodes and random points.
    pub raw: ResidualStats,
    /// Residual with the sharpened `π`, over random points and a node subset.
    pub refined: Option<ResidualStats>,
    pub residual_tol: f64,
    pub residual_ok: bool,
    /// `d(π, id) = sup ‖v‖`.
    pub displacement: f64,
    pub displacement_ok: bool,
    /// `sup ‖Π^c v‖` over nodes.
    pub center_leak: f64,
    pub center_ok: bool,
    /// `‖u + v‖₁`.
    pub norm1: f64,
    pub ball_ok: bool,
    /// `d(π, id) < 1/2`, so `π` has degree one and is onto.
    pub surjectivity_ok: bool,
    pub passed: bool,
}

/// How the center motion `τ` is represented.
enum Motion<'a> {
    Translate(&'a Section),
    Flow(&'a dynamics_catalog::FlowSpec, &'a Grid, &'a [f64]),
    Slide(DMatrix<f64>),
}

impl Motion<'_> {
    fn of(q: &QuasiConjugacy) -> Motion<'_> {
        match q.variant {
            Variant::A => Motion::Translate(&q.u),
            Variant::Bprime => Motion::Flow(
                q.flow.as_ref().expect("flow variant carries its flow"),
                q.u.grid(),
                q.tau_tilde.as_deref().expect("flow variant carries τ̃"),
            ),
            Variant::B => {
                let d = q.splitting.dim();
                let pc = &q.splitting.projectors_at(&TorusPoint::origin(d))[1];
                Motion::Slide(DMatrix::identity(d, d) - pc)
            }
        }
    }

    /// `τ_at(y)`, or its inverse for `sign = −1` (not available for slides).
    fn apply(&self, geometry: &dynamics_catalog::Geometry, at: &TorusPoint, y: &TorusPoint, sign: f64) -> TorusPoint {
        match self {
            Motion::Translate(u) => y.translate(&(u.eval_vector(at) * sign)),
            Motion::Flow(flow, grid, tau) => flow.time_map(y, sign * grid.interpolate_scalar(tau, at)),
            Motion::Slide(p) => at.translate(&mat_vec(p, &geometry.displacement(at, y))),
        }
    }

    /// Base point of `τ` in `π(g x) = τ_·(f(π x))`.
    fn anchor(&self, f: &MapSpec, g: &MapSpec, x: &TorusPoint) -> TorusPoint {
        match self {
            Motion::Slide(_) => g.forward(x),
            _ => f.forward(x),
        }
    }
}

struct Evaluator<'a> {
    q: &'a QuasiConjugacy,
    f: &'a MapSpec,
    g: &'a MapSpec,
    motion: Motion<'a>,
    geometry: dynamics_catalog::Geometry,
    steps: usize,
}

impl<'a> Evaluator<'a> {
    fn new(q: &'a QuasiConjugacy, f: &'a MapSpec, g: &'a MapSpec) -> Self {
        let steps = if q.variant == Variant::B { 0 } else { q.params.refine_steps };
        Evaluator { q, f, g, motion: Motion::of(q), geometry: f.geometry(), steps }
    }

    fn raw_pi(&self, x: &TorusPoint) -> TorusPoint {
        x.translate(&self.q.v.eval_vector(x))
    }

    /// `v(x)` sharpened along the `g`-orbit of `x`.
    fn refined_v(&self, x: &TorusPoint) -> Vector {
        let n = self.steps;
        let (f, g, s, v) = (self.f, self.g, &self.q.splitting, &self.q.v);
        let d = s.dim();
        let eye = DMatrix::<f64>::identity(d, d);
        let mut fwd = Vec::with_capacity(n + 1);
        fwd.push(*x);
        for k in 0..n {
            fwd.push(g.forward(&fwd[k]));
        }
        let mut q = v.eval_vector(&fwd[n]);
        for k in (0..n).rev() {
            let y = &fwd[k];
            let target = fwd[k + 1].translate(&q);
            let c = f.inverse(&self.motion.apply(&self.geometry, &f.forward(y), &target, -1.0));
            let pu = &s.projectors_at(y)[2];
            q = mat_vec(pu, &self.geometry.displacement(y, &c)) + mat_vec(&(&eye - pu), &v.eval_vector(y));
        }
        let proj = s.projectors_at(x);
        let unstable = mat_vec(&proj[2], &q);

        let mut back = Vec::with_capacity(n + 1);
        back.push(*x);
        for k in 0..n {
            back.push(g.inverse(&back[k]));
        }
        let mut q = v.eval_vector(&back[n]);
        for k in (1..=n).rev() {
            let y = &back[k];
            let next = &back[k - 1];
            let c = self.motion.apply(&self.geometry, &f.forward(y), &f.forward(&y.translate(&q)), 1.0);
            let ps = &s.projectors_at(next)[0];
            q = mat_vec(ps, &self.geometry.displacement(next, &c)) + mat_vec(&(&eye - ps), &v.eval_vector(next));
        }
        let stable = mat_vec(&proj[0], &q);
        unstable + stable + mat_vec(&proj[1], &v.eval_vector(x))
    }

    fn pi(&self, x: &TorusPoint, refined: bool) -> TorusPoint {
        if refined && self.steps > 0 {
            x.translate(&self.refined_v(x))
        } else {
            self.raw_pi(x)
        }
    }

    fn residual(&self, x: &TorusPoint, refined: bool) -> f64 {
        let lhs = self.pi(&self.g.forward(x), refined);
        let rhs = self.motion.apply(
            &self.geometry,
            &self.motion.anchor(self.f, self.g, x),
            &self.f.forward(&self.pi(x, refined)),
            1.0,
        );
        self.geometry.dist(&lhs, &rhs)
    }
}

fn random_points(d: usize, count: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v = Vector::zeros(d);
            for i in 0..d {
                v[i] = rng.random::<f64>();
            }
            TorusPoint::wrapped(v)
        })
        .collect()
}

/// `π(x)` with the sharpened `v` when the variant supports it.
pub fn pi_refined(q: &QuasiConjugacy, f: &MapSpec, g: &MapSpec, x: &TorusPoint) -> TorusPoint {
    Evaluator::new(q, f, g).pi(x, true)
}

/// Residual of the conjugacy equation plus the pointwise conditions on `π`.
pub fn verify_quasi_conjugacy(q: &QuasiConjugacy, f: &MapSpec, g: &MapSpec) -> Result<VerificationReport, SolverError> {
    let params = &q.params;
    let grid = q.grid();
    let d = grid.dim();
    if f.dim() != d || g.dim() != d {
        return Err(SolverError::Params("maps do not match the solution grid".into()));
    }
    let eval = Evaluator::new(q, f, g);
    let samples = random_points(d, params.residual_sample_count, params.seed ^ 0x7e57);

    let mut raw: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| eval.residual(&grid.node(i), false)).collect();
    raw.extend(samples.par_iter().map(|x| eval.residual(x, false)).collect::<Vec<_>>());
    let raw = ResidualStats::from(&raw);

    let refined = if eval.steps > 0 {
        let stride = grid.len().div_ceil(REFINED_NODE_BUDGET).max(1);
        let mut r: Vec<f64> =
            (0..grid.len()).into_par_iter().step_by(stride).map(|i| eval.residual(&grid.node(i), true)).collect();
        r.extend(samples.par_iter().map(|x| eval.residual(x, true)).collect::<Vec<_>>());
        Some(ResidualStats::from(&r))
    } else {
        None
    };
    let residual_ok = match &refined {
        Some(r) => r.sup < params.residual_tol && raw.sup < params.residual_tol.max(params.interpolation_tol),
        None => raw.sup < params.residual_tol,
    };

    let proj = NodeProjectors::new(&q.splitting, grid);
    let displacement = q.v.sup_norm();
    let center_leak = q.v.project(&proj, Which::C).sup_norm();
    let norm1 = (&q.u + &q.v).norm1_with(&proj);
    let displacement_ok = displacement < params.epsilon;
    let center_ok = center_leak < CENTER_TOL;
    let ball_ok = q.variant == Variant::B || norm1 <= params.epsilon;
    let surjectivity_ok = displacement < INJECTIVITY_RADIUS;
    Ok(VerificationReport {
        raw,
        refined,
        residual_tol: params.residual_tol,
        residual_ok,
        displacement,
        displacement_ok,
        center_leak,
        center_ok,
        norm1,
        ball_ok,
        surjectivity_ok,
        passed: residual_ok && displacement_ok && center_ok && ball_ok && surjectivity_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafReport {
    pub samples: usize,
    pub leaf_length: f64,
    /// Max distance of `π(y)` from the center leaf of `f` through `π(x)`,
    /// for `y` on the center leaf of `g` through `x`.
    pub max_leaf_deviation: f64,
    pub pairs: usize,
    /// `min d(π x, π y) / d(x, y)` over sampled pairs.
    pub injectivity_proxy: f64,
}

const LEAF_STEPS: usize = 10;
const LEAF_STEP: f64 = 0.02;

/// Follow center leaves of `g`, map them by `π`, and measure how far they
/// stray from the (linear) center leaves of `f`.
pub fn verify_leaf_conjugacy(
    q: &QuasiConjugacy,
    f: &MapSpec,
    g: &MapSpec,
    samples: usize,
) -> Result<LeafReport, SolverError> {
    let s = &q.splitting;
    let (ds, dc, du) = s.dims();
    if !s.is_constant() || dc != 1 {
        return Err(SolverError::Unsupported("leaf check needs a linear one-dimensional center foliation".into()));
    }
    let d = s.dim();
    let ec = s.frame_at(&TorusPoint::origin(d)).basis_c.column(0).into_owned();
    let ec = Vector::from_slice(ec.as_slice());
    let eval = Evaluator::new(q, f, g);
    let geometry = f.geometry();
    let orbit = q.params.orbit_length;
    let direction = |y: &TorusPoint, prev: &Vector| -> Vector {
        let frame = estimate_frame_at(g, y, orbit, (ds, dc, du)).expect("center frame of g");
        let c = frame.basis_c.column(0);
        let mut e = Vector::from_slice(c.as_slice());
        if e.dot(prev) < 0.0 {
            e = -e;
        }
        e
    };
    let starts = random_points(d, samples, q.params.seed ^ 0x1eaf);
    let deviation = starts
        .par_iter()
        .map(|x| {
            let px = eval.pi(x, true);
            let mut y = *x;
            let mut e = ec;
            let mut worst: f64 = 0.0;
            for _ in 0..LEAF_STEPS {
                let k1 = direction(&y, &e);
                let k2 = direction(&y.translate(&(k1 * (LEAF_STEP / 2.0))), &k1);
                let k3 = direction(&y.translate(&(k2 * (LEAF_STEP / 2.0))), &k1);
                let k4 = direction(&y.translate(&(k3 * LEAF_STEP)), &k1);
                let step = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (LEAF_STEP / 6.0);
                y = y.translate(&step);
                e = k1;
                let w = geometry.displacement(&px, &eval.pi(&y, true));
                let off = w - ec * w.dot(&ec);
                worst = worst.max(off.norm());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    let pairs = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(q.params.seed ^ 0x9a17);
    let pair_points: Vec<(TorusPoint, TorusPoint)> = (0..pairs)
        .map(|_| {
            let mut x = Vector::zeros(d);
            let mut dir = Vector::zeros(d);
            for i in 0..d {
                x[i] = rng.random::<f64>();
                dir[i] = rng.random::<f64>() * 2.0 - 1.0;
            }
            let r = 0.01 + 0.19 * rng.random::<f64>();
            let dir = dir * (r / dir.norm().max(1e-12));
            let x = TorusPoint::wrapped(x);
            (x, x.translate(&dir))
        })
        .collect();
    let injectivity_proxy = pair_points
        .par_iter()
        .map(|(x, y)| geometry.dist(&eval.pi(x, true), &eval.pi(y, true)) / geometry.dist(x, y))
        .reduce(|| f64::INFINITY, f64::min);

    Ok(LeafReport {
        samples,
        leaf_length: LEAF_STEP * LEAF_STEPS as f64,
        max_leaf_deviation: deviation,
        pairs,
        injectivity_proxy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub epsilon: f64,
    pub pairs: usize,
    /// `max ‖Φ ω − Φ ω'‖₁ / ‖ω − ω'‖₁`.
    pub max_ratio: f64,
    /// `max ‖Φ ω‖₁`.
    pub max_image_norm1: f64,
}

impl ContractionReport {
    pub fn contracts(&self) -> bool {
        self.max_ratio <= 0.5
    }

    pub fn maps_into_ball(&self) -> bool {
        self.max_image_norm1 <= 0.75 * self.epsilon
    }
}

/// Lipschitz constant and image radius of `Φ_h` sampled on random pairs
/// in the ball `‖ω‖₁ ≤ ε`.
pub fn empirical_contraction(
    f: &MapSpec,
    h: &dyn PointMap,
    s: &Splitting,
    params: &SolverParams,
    n_pairs: usize,
) -> Result<ContractionReport, SolverError> {
    params.validate()?;
    let grid = params.grid(f.dim())?;
    let ops = Operators::new(f, h, s, &grid, params.neumann_depth, params.neumann_tol)?;
    let eps = params.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0xc0);
    let draw = |rng: &mut ChaCha8Rng| -> Section {
        let w = random_section(&grid, rng.random());
        let r = 0.1 + 0.9 * rng.random::<f64>();
        w.scale(eps * r / ops.norm1(&w))
    };
    let mut max_ratio: f64 = 0.0;
    let mut max_image: f64 = 0.0;
    for _ in 0..n_pairs {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let (pa, pb) = (ops.Phi(&a)?, ops.Phi(&b)?);
        max_image = max_image.max(ops.norm1(&pa)).max(ops.norm1(&pb));
        let den = ops.norm1(&(&a - &b));
        if den > 0.0 {
            max_ratio = max_ratio.max(ops.norm1(&(&pa - &pb)) / den);
        }
    }
    Ok(ContractionReport { epsilon: eps, pairs: n_pairs, max_ratio, max_image_norm1: max_image })
}
