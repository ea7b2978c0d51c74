#![allow(non_snake_case)]

use dynamics_catalog::{mat_vec, operator_norm, FlowSpec, MapSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;
use section_space::Section;
use serde::{Deserialize, Serialize};
use splitting::{estimate_splitting_seeded, exact_splitting_seeded, Splitting, Which};
use torus_geometry::{Grid, TorusPoint, Vector, INJECTIVITY_RADIUS};

use crate::field::{to_mat, MatField, Sampler};
use crate::guard::{evaluate, GuardReport};
use crate::ops::Operators;
use crate::verify::{verify_quasi_conjugacy, VerificationReport};
use crate::{Composite, SolverError, SolverParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Center motion by a center section `u`.
    A,
    /// Center motion by the time-`τ̃` map of a center flow.
    Bprime,
    /// Center motion by sliding along linear center leaves.
    B,
}

/// A solved quasi-conjugacy `π(x) = x + v(x)`.
#[derive(Clone, Debug)]
pub struct QuasiConjugacy {
    pub variant: Variant,
    /// Center section; `τ̃·e` for [`Variant::Bprime`], zero for [`Variant::B`].
    pub u: Section,
    pub tau_tilde: Option<Vec<f64>>,
    pub v: Section,
    pub iterations: usize,
    pub contraction_trace: Vec<f64>,
    pub guard: Option<GuardReport>,
    /// `sup ‖Π^{us}‖`, the constant of the center slide.
    pub k1: Option<f64>,
    pub flow: Option<FlowSpec>,
    pub splitting: Splitting,
    pub params: SolverParams,
    pub verification: VerificationReport,
}

impl QuasiConjugacy {
    pub fn grid(&self) -> &Grid {
        self.v.grid()
    }

    /// `(sup, mean)` of the conjugacy residual used for the pass flag.
    pub fn residual(&self) -> (f64, f64) {
        let r = self.verification.refined.as_ref().unwrap_or(&self.verification.raw);
        (r.sup, r.mean)
    }

    pub fn surjectivity_ok(&self) -> bool {
        self.verification.surjectivity_ok
    }

    /// `ω = u + v`.
    pub fn omega(&self) -> Section {
        &self.u + &self.v
    }

    /// `π(x)` from the interpolated `v`.
    pub fn pi(&self, x: &TorusPoint) -> TorusPoint {
        x.translate(&self.v.eval_vector(x))
    }

    pub fn report(&self) -> SolutionReport {
        let tau = self.tau_tilde.as_ref().map(|t| {
            let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            [min, mean, max]
        });
        SolutionReport {
            variant: self.variant,
            params: self.params.clone(),
            resolution: self.grid().resolution().to_vec(),
            iterations: self.iterations,
            contraction_trace: self.contraction_trace.clone(),
            u_sup: self.u.sup_norm(),
            v_sup: self.v.sup_norm(),
            tau_tilde_min_mean_max: tau,
            k1: self.k1,
            guard: self.guard.clone(),
            verification: self.verification.clone(),
        }
    }
}

/// JSON summary of a solve; sections are written separately.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionReport {
    pub variant: Variant,
    pub params: SolverParams,
    pub resolution: Vec<usize>,
    pub iterations: usize,
    pub contraction_trace: Vec<f64>,
    pub u_sup: f64,
    pub v_sup: f64,
    pub tau_tilde_min_mean_max: Option<[f64; 3]>,
    pub k1: Option<f64>,
    pub guard: Option<GuardReport>,
    pub verification: VerificationReport,
}

pub(crate) fn splitting_for(f: &MapSpec, grid: &Grid, params: &SolverParams) -> Result<Splitting, SolverError> {
    if f.constant_differential().is_some() {
        Ok(exact_splitting_seeded(f, (1.0, 1.0), params.seed)?)
    } else {
        Ok(estimate_splitting_seeded(f, params.orbit_length, grid, params.seed)?)
    }
}

fn check_pair(f: &MapSpec, g: &MapSpec) -> Result<(), SolverError> {
    if f.dim() != g.dim() {
        return Err(SolverError::Params(format!("f acts on T^{} but g on T^{}", f.dim(), g.dim())));
    }
    if f.geometry() != g.geometry() {
        return Err(SolverError::Params("f and g live on different phase spaces".into()));
    }
    Ok(())
}

struct Iterated {
    omega: Section,
    iterations: usize,
    trace: Vec<f64>,
}

fn iterate<P>(ops: &Operators<'_>, params: &SolverParams, start: Section, post: P) -> Result<Iterated, SolverError>
where
    P: Fn(Section) -> Section,
{
    let mut omega = start;
    let mut trace = Vec::new();
    for k in 0..params.max_iterations {
        let next = post(ops.Phi(&omega)?);
        let step = ops.norm1(&(&next - &omega));
        trace.push(step);
        omega = next;
        if step < params.fixpoint_tol {
            return Ok(Iterated { omega, iterations: k + 1, trace });
        }
    }
    let last = trace.last().copied().unwrap_or(f64::NAN);
    Err(SolverError::NoConvergence { iterations: params.max_iterations, last, trace })
}

fn guarded<'a>(
    f: &'a MapSpec,
    g: &'a MapSpec,
    split: &'a Splitting,
    grid: &Grid,
    params: &SolverParams,
) -> Result<(Operators<'a>, GuardReport), SolverError> {
    let h = Composite::new(g, f);
    let ops = Operators::new(f, &h, split, grid, params.neumann_depth, params.neumann_tol)?;
    let guard = evaluate(&ops, f, &h, params.epsilon, params.guard_samples, params.seed);
    if params.enforce_guard && !guard.measured_ok {
        return Err(SolverError::Guard(format!(
            "{} (a priori form {})",
            guard.summary(),
            if guard.a_priori_ok { "holds" } else { "fails" }
        )));
    }
    Ok((ops, guard))
}

/// Fixed point of `Φ_h` from `ω₀ = 0`.
pub fn solve_theorem_A(f: &MapSpec, g: &MapSpec, params: &SolverParams) -> Result<QuasiConjugacy, SolverError> {
    solve_theorem_A_from(f, g, params, None)
}

/// Fixed point of `Φ_h` from a given starting section.
pub fn solve_theorem_A_from(
    f: &MapSpec,
    g: &MapSpec,
    params: &SolverParams,
    start: Option<&Section>,
) -> Result<QuasiConjugacy, SolverError> {
    params.validate()?;
    check_pair(f, g)?;
    let grid = params.grid(f.dim())?;
    let split = splitting_for(f, &grid, params)?;
    let (ops, guard) = guarded(f, g, &split, &grid, params)?;
    let start = match start {
        Some(s) if s.grid() == &grid => s.clone(),
        Some(_) => return Err(SolverError::Section(section_space::SectionError::GridMismatch)),
        None => Section::zeros(&grid),
    };
    let it = iterate(&ops, params, start, |w| w)?;
    let parts = it.omega.split_with(ops.projectors());
    drop(ops);
    finish(f, g, Variant::A, parts.u_part, None, parts.v_part, it, Some(guard), None, None, split, params)
}

/// Fixed point with the center unknown written as `τ̃` times the flow
/// generator.
pub fn solve_theorem_Bprime(
    f: &MapSpec,
    g: &MapSpec,
    flow: &FlowSpec,
    params: &SolverParams,
) -> Result<QuasiConjugacy, SolverError> {
    params.validate()?;
    check_pair(f, g)?;
    if flow.dim() != f.dim() {
        return Err(SolverError::Params("flow dimension differs from the map".into()));
    }
    let grid = params.grid(f.dim())?;
    let split = splitting_for(f, &grid, params)?;
    if split.dims().1 != 1 {
        return Err(SolverError::Unsupported(format!("center dimension {} is not 1", split.dims().1)));
    }
    let (ops, guard) = guarded(f, g, &split, &grid, params)?;
    let proj = ops.projectors().clone();
    let on_generator = |w: Section| {
        w.map_nodes(|i, x, val| {
            let c = proj.apply(i, Which::C, val);
            let e = flow.generator(x);
            let tau = c.dot(&e) / e.dot(&e);
            *val - c + e * tau
        })
    };
    let it = iterate(&ops, params, Section::zeros(&grid), on_generator)?;
    let parts = it.omega.split_with(ops.projectors());
    let tau: Vec<f64> = (0..grid.len())
        .map(|i| {
            let e = flow.generator(&grid.node(i));
            parts.u_part.values()[i].dot(&e) / e.dot(&e)
        })
        .collect();
    drop(ops);
    finish(
        f,
        g,
        Variant::Bprime,
        parts.u_part,
        Some(tau),
        parts.v_part,
        it,
        Some(guard),
        None,
        Some(flow.clone()),
        split,
        params,
    )
}

/// Operators of the hyperbolic-only equation
/// `v(z) = Π^{us} exp_z⁻¹ f(exp_{g⁻¹z} v(g⁻¹z))`.
struct Transversal<'a> {
    f: &'a MapSpec,
    grid: Grid,
    d: usize,
    pre: Vec<TorusPoint>,
    at_pre: Sampler,
    df_pre: MatField,
    at_post: Sampler,
    df_inv: MatField,
    p_s: DMatrix<f64>,
    p_u: DMatrix<f64>,
    p_us: DMatrix<f64>,
    q_s: f64,
    q_u: f64,
}

impl<'a> Transversal<'a> {
    fn new(f: &'a MapSpec, g: &MapSpec, split: &Splitting, grid: &Grid) -> Result<Self, SolverError> {
        let d = f.dim();
        let n = grid.len();
        let frame = split.frame_at(&TorusPoint::origin(d));
        let nodes: Vec<TorusPoint> = (0..n).map(|i| grid.node(i)).collect();
        let pre: Vec<TorusPoint> = nodes.par_iter().map(|z| g.inverse(z)).collect();
        let post: Vec<TorusPoint> = nodes.par_iter().map(|z| g.forward(z)).collect();
        let const_df = f.constant_differential().map(|m| m.to_float());
        let df_pre = match &const_df {
            Some(m) => MatField::Constant(Box::new(to_mat(m))),
            None => MatField::build(n, false, |i| f.differential(&pre[i])),
        };
        let df_inv = match &const_df {
            Some(m) => MatField::Constant(Box::new(to_mat(&m.clone().try_inverse().expect("unimodular")))),
            None => MatField::build(n, false, |i| {
                f.differential(&nodes[i]).try_inverse().unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN))
            }),
        };
        let count = if df_pre.is_per_node() { n } else { 1 };
        let (q_s, q_u) = (0..count)
            .into_par_iter()
            .map(|i| {
                let qs = sigma(&(&frame.proj_s * df_pre.matrix(i, d) * &frame.basis_s));
                let qu = sigma(&(&frame.proj_u * df_inv.matrix(i, d) * &frame.basis_u));
                (qs, qu)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        if !(q_s < 1.0 && q_u < 1.0) || q_s.is_nan() || q_u.is_nan() {
            return Err(SolverError::Guard(format!("transversal block rates q_s={q_s:.4}, q_u={q_u:.4}")));
        }
        Ok(Transversal {
            f,
            grid: grid.clone(),
            d,
            at_pre: Sampler::new(grid, &pre),
            pre,
            df_pre,
            at_post: Sampler::new(grid, &post),
            df_inv,
            p_us: DMatrix::identity(d, d) - &frame.proj_c,
            p_s: frame.proj_s,
            p_u: frame.proj_u,
            q_s,
            q_u,
        })
    }

    fn map<F: Fn(usize) -> Vector + Sync + Send>(&self, f: F) -> Vec<Vector> {
        (0..self.grid.len()).into_par_iter().map(f).collect()
    }

    fn project(&self, p: &DMatrix<f64>, w: &[Vector]) -> Vec<Vector> {
        self.map(|i| mat_vec(p, &w[i]))
    }

    fn t(&self, v: &[Vector]) -> Vec<Vector> {
        let geometry = self.f.geometry();
        self.map(|i| {
            let q = self.pre[i].translate(&self.at_pre.gather(v, i));
            mat_vec(&self.p_us, &geometry.displacement(&self.grid.node(i), &self.f.forward(&q)))
        })
    }

    fn a(&self, v: &[Vector]) -> Vec<Vector> {
        self.map(|i| mat_vec(&self.p_us, &self.df_pre.apply(i, self.d, &self.at_pre.gather(v, i))))
    }

    fn a_u_inv(&self, v: &[Vector]) -> Vec<Vector> {
        self.map(|i| mat_vec(&self.p_u, &self.df_inv.apply(i, self.d, &self.at_post.gather(v, i))))
    }

    /// `(I − A)⁻¹` by block Neumann series.
    fn solve_linear(&self, r: &[Vector], params: &SolverParams) -> Vec<Vector> {
        let tol = params.neumann_tol;
        let run = |first: Vec<Vector>, q: f64, skip: bool, step: &dyn Fn(&[Vector]) -> Vec<Vector>| {
            let mut sum = if skip { vec![Vector::zeros(self.d); first.len()] } else { first.clone() };
            let mut t = first;
            for _ in 0..10_000 {
                t = step(&t);
                let n = t.iter().map(Vector::norm).fold(0.0, f64::max);
                for (s, x) in sum.iter_mut().zip(&t) {
                    *s += *x;
                }
                if n * q / (1.0 - q) < tol || n == 0.0 {
                    break;
                }
            }
            sum
        };
        let s = run(self.project(&self.p_s, r), self.q_s, false, &|t| self.project(&self.p_s, &self.a(t)));
        let u = run(self.project(&self.p_u, r), self.q_u, true, &|t| self.a_u_inv(t));
        s.into_iter().zip(u).map(|(a, b)| a - b).collect()
    }
}

fn sigma(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        0.0
    } else {
        operator_norm(m)
    }
}

/// Hyperbolic-only fixed point for maps whose center foliation is linear;
/// the center motion slides along center leaves onto hyperbolic planes.
pub fn solve_theorem_B_transversal(
    f: &MapSpec,
    g: &MapSpec,
    params: &SolverParams,
) -> Result<QuasiConjugacy, SolverError> {
    params.validate()?;
    check_pair(f, g)?;
    let grid = params.grid(f.dim())?;
    let split = splitting_for(f, &grid, params)?;
    if !split.is_constant() || split.dims().1 == 0 {
        return Err(SolverError::Unsupported("center foliation must be linear and nontrivial".into()));
    }
    let op = Transversal::new(f, g, &split, &grid)?;
    let mut v = vec![Vector::zeros(f.dim()); grid.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let sup = v.iter().map(Vector::norm).fold(0.0, f64::max);
        if sup >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(sup));
        }
        let tv = op.t(&v);
        let av = op.a(&v);
        let r: Vec<Vector> = tv.iter().zip(&av).map(|(a, b)| *a - *b).collect();
        let next = op.solve_linear(&r, params);
        let step = next.iter().zip(&v).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
        trace.push(step);
        v = next;
        iterations += 1;
        if step < params.fixpoint_tol {
            break;
        }
        if iterations >= params.max_iterations {
            return Err(SolverError::NoConvergence { iterations, last: step, trace });
        }
    }
    let k1 = operator_norm(&op.p_us);
    let v = Section::from_values(grid.clone(), v)?;
    let it = Iterated { omega: v.clone(), iterations, trace };
    finish(f, g, Variant::B, Section::zeros(&grid), None, v, it, None, Some(k1), None, split, params)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    f: &MapSpec,
    g: &MapSpec,
    variant: Variant,
    u: Section,
    tau_tilde: Option<Vec<f64>>,
    v: Section,
    it: Iterated,
    guard: Option<GuardReport>,
    k1: Option<f64>,
    flow: Option<FlowSpec>,
    splitting: Splitting,
    params: &SolverParams,
) -> Result<QuasiConjugacy, SolverError> {
    let mut q = QuasiConjugacy {
        variant,
        u,
        tau_tilde,
        v,
        iterations: it.iterations,
        contraction_trace: it.trace,
        guard,
        k1,
        flow,
        splitting,
        params: params.clone(),
        verification: VerificationReport::default(),
    };
    q.verification = verify_quasi_conjugacy(&q, f, g)?;
    Ok(q)
}
