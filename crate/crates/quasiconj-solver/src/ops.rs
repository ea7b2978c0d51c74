//! The operators of the contraction, on sections sampled over a grid.
//!
//! [`Operators`] precomputes every preimage, interpolation stencil and
//! matrix field once for a fixed `(f, h, splitting, grid)`. The free
//! `op_*` functions evaluate the same formulas directly and serve as an
//! independent reference.

#![allow(non_snake_case)]

use dynamics_catalog::{operator_norm, Geometry, MapSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;
use section_space::{NodeProjectors, Section};
use serde::{Deserialize, Serialize};
use splitting::{Splitting, Which};
use torus_geometry::{Grid, TorusPoint, Vector, INJECTIVITY_RADIUS};

use crate::field::{to_dmatrix, to_mat, MatField, Sampler};
use crate::{NeumannDepth, PointMap, SolverError};

/// Measured norms of the blocks that enter `P⁻¹` and the guard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockRates {
    /// `sup ‖Π^s J⁻¹ F‖` on stable sections.
    pub q_s: f64,
    /// `sup ‖Π^u F⁻¹ J‖` on unstable sections.
    pub q_u: f64,
    /// `sup ‖J‖` on center sections.
    pub j_c: f64,
    pub j_norm: f64,
    pub j_inv_norm: f64,
    pub pi_s: f64,
    pub pi_c: f64,
    pub pi_u: f64,
    /// `sup_x |x − h(x)|`.
    pub delta: f64,
}

impl BlockRates {
    /// Bound on `‖P⁻¹ w‖₁ / ‖w‖` from the block series.
    pub fn p_inverse_bound(&self) -> f64 {
        let s = if self.q_s < 1.0 { self.pi_s / (1.0 - self.q_s) } else { f64::INFINITY };
        let u = if self.q_u < 1.0 { self.pi_u * self.q_u / (1.0 - self.q_u) } else { f64::INFINITY };
        s + u + self.j_c * self.pi_c
    }
}

/// Precomputed operators for one `(f, h, splitting, grid)`.
pub struct Operators<'a> {
    f: &'a MapSpec,
    split: &'a Splitting,
    grid: Grid,
    d: usize,
    geometry: Geometry,
    proj: NodeProjectors,
    linear: bool,
    f_inv_pts: Vec<TorusPoint>,
    /// `f(f⁻¹ x)`, the node as reconstructed by the map.
    f_round: Vec<TorusPoint>,
    at_f_inv: Sampler,
    df_at_f_inv: MatField,
    at_f: Sampler,
    df_inv: MatField,
    at_h: Sampler,
    mj: MatField,
    at_h_inv: Sampler,
    mj_inv: MatField,
    disp_h: Vec<Vector>,
    rates: BlockRates,
    lambda: f64,
    depth: NeumannDepth,
    neumann_tol: f64,
}

fn projector_sum(a: &[DMatrix<f64>; 3], b: &[DMatrix<f64>; 3]) -> DMatrix<f64> {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

fn sigma(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        0.0
    } else {
        operator_norm(m)
    }
}

fn sup_abs(values: &[Vector]) -> f64 {
    values.par_iter().map(Vector::norm).reduce(|| 0.0, f64::max)
}

impl<'a> Operators<'a> {
    pub fn new(
        f: &'a MapSpec,
        h: &dyn PointMap,
        split: &'a Splitting,
        grid: &Grid,
        depth: NeumannDepth,
        neumann_tol: f64,
    ) -> Result<Operators<'a>, SolverError> {
        let d = f.dim();
        if grid.dim() != d || split.dim() != d || h.dim() != d {
            return Err(SolverError::Params("map, splitting and grid dimensions differ".into()));
        }
        let n = grid.len();
        let nodes: Vec<TorusPoint> = (0..n).map(|i| grid.node(i)).collect();
        let geometry = f.geometry();
        let proj = NodeProjectors::new(split, grid);
        let const_df = f.constant_differential().map(|m| m.to_float());
        let linear = const_df.is_some();

        let f_inv_pts: Vec<TorusPoint> = nodes.par_iter().map(|x| f.inverse(x)).collect();
        let f_pts: Vec<TorusPoint> = nodes.par_iter().map(|x| f.forward(x)).collect();
        let h_pts: Vec<TorusPoint> = nodes.par_iter().map(|x| h.forward(x)).collect();
        let h_inv_pts: Vec<TorusPoint> = nodes.par_iter().map(|x| h.inverse(x)).collect();

        let df_at_f_inv = match &const_df {
            Some(m) => MatField::Constant(Box::new(to_mat(m))),
            None => MatField::build(n, false, |i| f.differential(&f_inv_pts[i])),
        };
        let df_inv = match &const_df {
            Some(m) => MatField::Constant(Box::new(to_mat(&m.clone().try_inverse().expect("unimodular")))),
            None => MatField::build(n, false, |i| {
                f.differential(&nodes[i]).try_inverse().unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN))
            }),
        };
        let node_proj = |i: usize| -> [DMatrix<f64>; 3] {
            [
                to_dmatrix(proj.block(i, Which::S), d),
                to_dmatrix(proj.block(i, Which::C), d),
                to_dmatrix(proj.block(i, Which::U), d),
            ]
        };
        let (mj, mj_inv) = if split.is_constant() {
            (MatField::Identity, MatField::Identity)
        } else {
            let mj = MatField::build(n, false, |i| projector_sum(&node_proj(i), &split.projectors_at(&h_pts[i])));
            let mj_inv = MatField::build(n, false, |i| {
                projector_sum(&split.projectors_at(&h_inv_pts[i]), &node_proj(i))
                    .try_inverse()
                    .unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN))
            });
            (mj, mj_inv)
        };
        let disp_h: Vec<Vector> = (0..n).into_par_iter().map(|i| geometry.displacement(&nodes[i], &h_pts[i])).collect();
        let delta = sup_abs(&disp_h);
        if delta >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(delta));
        }

        let mut ops = Operators {
            f,
            split,
            grid: grid.clone(),
            d,
            geometry,
            proj,
            linear,
            at_f_inv: Sampler::new(grid, &f_inv_pts),
            f_round: if linear { Vec::new() } else { f_inv_pts.par_iter().map(|p| f.forward(p)).collect() },
            f_inv_pts,
            df_at_f_inv,
            at_f: Sampler::new(grid, &f_pts),
            df_inv,
            at_h: Sampler::new(grid, &h_pts),
            mj,
            at_h_inv: Sampler::new(grid, &h_inv_pts),
            mj_inv,
            disp_h,
            rates: BlockRates::default(),
            lambda: split.constants().lambda,
            depth,
            neumann_tol,
        };
        if [&ops.df_inv, &ops.mj_inv].iter().any(|m| match m {
            MatField::Constant(b) => b.iter().any(|x| !x.is_finite()),
            MatField::PerNode(v) => v.iter().any(|b| b.iter().any(|x| !x.is_finite())),
            MatField::Identity => false,
        }) {
            return Err(SolverError::Unsupported("singular differential or center-motion matrix".into()));
        }
        ops.rates = ops.measure_rates(h, &nodes, &h_inv_pts, &const_df);
        ops.rates.delta = delta;
        Ok(ops)
    }

    fn measure_rates(
        &self,
        h: &dyn PointMap,
        nodes: &[TorusPoint],
        h_inv_pts: &[TorusPoint],
        const_df: &Option<DMatrix<f64>>,
    ) -> BlockRates {
        let d = self.d;
        let f = self.f;
        let split = self.split;
        let uniform = split.is_constant() && const_df.is_some();
        let count = if uniform { 1 } else { nodes.len() };
        let df_at = |p: &TorusPoint| const_df.clone().unwrap_or_else(|| f.differential(p));
        let per_node = |i: usize| -> [f64; 9] {
            let x = &nodes[i];
            let ps = to_dmatrix(self.proj.block(i, Which::S), d);
            let pc = to_dmatrix(self.proj.block(i, Which::C), d);
            let pu = to_dmatrix(self.proj.block(i, Which::U), d);
            let p = f.inverse(&h_inv_pts[i]);
            let bs = split.frame_at(&p).basis_s;
            let q_s = sigma(&(&ps * self.mj_inv.matrix(i, d) * df_at(&p) * bs));
            let fx = f.forward(x);
            let hfx = h.forward(&fx);
            let mj_fx = if split.is_constant() {
                DMatrix::identity(d, d)
            } else {
                projector_sum(&split.projectors_at(&fx), &split.projectors_at(&hfx))
            };
            let bu = split.frame_at(&hfx).basis_u;
            let q_u = sigma(&(&pu * self.df_inv.matrix(i, d) * mj_fx * bu));
            let hx = h.forward(x);
            let bc = split.frame_at(&hx).basis_c;
            let mj = self.mj.matrix(i, d);
            let j_c = sigma(&(&mj * bc));
            [q_s, q_u, j_c, sigma(&mj), sigma(&self.mj_inv.matrix(i, d)), sigma(&ps), sigma(&pc), sigma(&pu), 0.0]
        };
        let sup = (0..count)
            .into_par_iter()
            .map(per_node)
            .reduce(|| [0.0; 9], |a, b| std::array::from_fn(|k| a[k].max(b[k])));
        BlockRates {
            q_s: sup[0],
            q_u: sup[1],
            j_c: sup[2],
            j_norm: sup[3],
            j_inv_norm: sup[4],
            pi_s: sup[5],
            pi_c: sup[6],
            pi_u: sup[7],
            delta: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn splitting(&self) -> &Splitting {
        self.split
    }

    pub fn projectors(&self) -> &NodeProjectors {
        &self.proj
    }

    pub fn rates(&self) -> &BlockRates {
        &self.rates
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// `x ↦ exp_x⁻¹ h(x)` at the nodes.
    pub fn displacement_h(&self) -> Result<Section, SolverError> {
        self.section(self.disp_h.clone())
    }

    /// Number of contraction steps allowed in each Neumann series.
    pub fn depth_cap(&self) -> usize {
        match self.depth {
            NeumannDepth::Fixed(n) => n,
            NeumannDepth::Auto => {
                let r = (1.0 + self.lambda) / 2.0;
                let mut k = 0usize;
                while r.powi(k as i32 + 1) / (1.0 - r) >= self.neumann_tol && k < 10_000 {
                    k += 1;
                }
                k
            }
        }
    }

    fn section(&self, values: Vec<Vector>) -> Result<Section, SolverError> {
        Ok(Section::from_values(self.grid.clone(), values)?)
    }

    fn check(&self, w: &Section) -> Result<(), SolverError> {
        if w.grid() != &self.grid {
            return Err(SolverError::Section(section_space::SectionError::GridMismatch));
        }
        Ok(())
    }

    fn map_nodes<F: Fn(usize) -> Vector + Sync + Send>(&self, f: F) -> Vec<Vector> {
        (0..self.grid.len()).into_par_iter().map(f).collect()
    }

    fn raw_project(&self, w: &[Vector], which: Which) -> Vec<Vector> {
        self.map_nodes(|i| self.proj.apply(i, which, &w[i]))
    }

    fn raw_f(&self, w: &[Vector]) -> Vec<Vector> {
        self.map_nodes(|i| self.df_at_f_inv.apply(i, self.d, &self.at_f_inv.gather(w, i)))
    }

    fn raw_f_inv(&self, w: &[Vector]) -> Vec<Vector> {
        self.map_nodes(|i| self.df_inv.apply(i, self.d, &self.at_f.gather(w, i)))
    }

    fn raw_j(&self, w: &[Vector]) -> Vec<Vector> {
        self.map_nodes(|i| self.mj.apply(i, self.d, &self.at_h.gather(w, i)))
    }

    fn raw_j_inv(&self, w: &[Vector]) -> Vec<Vector> {
        self.map_nodes(|i| self.mj_inv.apply(i, self.d, &self.at_h_inv.gather(w, i)))
    }

    fn raw_beta(&self, w: &[Vector]) -> Result<Vec<Vector>, SolverError> {
        let s = sup_abs(w);
        if s >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(s));
        }
        if self.linear {
            return Ok(self.raw_f(w));
        }
        Ok(self.map_nodes(|i| {
            let q = self.f_inv_pts[i].translate(&self.at_f_inv.gather(w, i));
            self.geometry.displacement(&self.f_round[i], &self.f.forward(&q))
        }))
    }

    fn raw_eta(&self, w: &[Vector]) -> Result<Vec<Vector>, SolverError> {
        if self.linear {
            let s = sup_abs(w);
            if s >= INJECTIVITY_RADIUS {
                return Err(SolverError::Injectivity(s));
            }
            return Ok(vec![Vector::zeros(self.d); w.len()]);
        }
        let b = self.raw_beta(w)?;
        let fw = self.raw_f(w);
        Ok(b.into_iter().zip(fw).map(|(x, y)| x - y).collect())
    }

    fn raw_theta(&self, w: &[Vector]) -> Result<Vec<Vector>, SolverError> {
        let reach = sup_abs(w) + self.rates.delta;
        if reach >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(reach));
        }
        if matches!(self.mj, MatField::Identity) {
            return Ok(self.disp_h.clone());
        }
        Ok(self.map_nodes(|i| {
            let wh = self.at_h.gather(w, i);
            self.disp_h[i] + wh - self.mj.apply(i, self.d, &wh)
        }))
    }

    fn raw_p(&self, w: &[Vector]) -> Vec<Vector> {
        let u = self.raw_project(w, Which::C);
        let v: Vec<Vector> = w.iter().zip(&u).map(|(a, b)| *a - *b).collect();
        let ju = self.raw_j_inv(&u);
        let jfv = self.raw_j_inv(&self.raw_f(&v));
        (0..w.len()).map(|i| v[i] - ju[i] - jfv[i]).collect()
    }

    fn series<T>(&self, first: Vec<Vector>, q: f64, skip_first: bool, step: T) -> Vec<Vector>
    where
        T: Fn(&[Vector]) -> Vec<Vector>,
    {
        let cap = self.depth_cap();
        let mut sum = if skip_first { vec![Vector::zeros(self.d); first.len()] } else { first.clone() };
        let mut t = first;
        for _ in 0..cap {
            t = step(&t);
            for (s, x) in sum.iter_mut().zip(&t) {
                *s += *x;
            }
            if self.depth == NeumannDepth::Auto && sup_abs(&t) * q / (1.0 - q) < self.neumann_tol {
                break;
            }
        }
        sum
    }

    fn raw_p_inv(&self, w: &[Vector]) -> Result<Vec<Vector>, SolverError> {
        let r = (1.0 + self.lambda) / 2.0;
        let BlockRates { q_s, q_u, .. } = self.rates;
        if q_s > r || q_u > r {
            return Err(SolverError::Guard(format!("block rates q_s={q_s:.4}, q_u={q_u:.4} exceed (1+λ)/2={r:.4}")));
        }
        let (ds, _, du) = self.split.dims();
        let stable = if ds > 0 {
            self.series(self.raw_project(w, Which::S), q_s, false, |t| {
                self.raw_project(&self.raw_j_inv(&self.raw_f(t)), Which::S)
            })
        } else {
            vec![Vector::zeros(self.d); w.len()]
        };
        let unstable = if du > 0 {
            self.series(self.raw_project(w, Which::U), q_u, true, |t| {
                self.raw_project(&self.raw_f_inv(&self.raw_j(t)), Which::U)
            })
        } else {
            vec![Vector::zeros(self.d); w.len()]
        };
        let center = self.raw_project(&self.raw_j(&self.raw_project(w, Which::C)), Which::C);
        Ok((0..w.len()).map(|i| stable[i] - unstable[i] - center[i]).collect())
    }

    fn raw_phi(&self, omega: &[Vector]) -> Result<Vec<Vector>, SolverError> {
        let u = self.raw_project(omega, Which::C);
        let v: Vec<Vector> = omega.iter().zip(&u).map(|(a, b)| *a - *b).collect();
        let eta = self.raw_eta(&v)?;
        let theta = self.raw_theta(&v)?;
        let rhs: Vec<Vector> = eta.iter().zip(&theta).map(|(a, b)| *a - *b).collect();
        self.raw_p_inv(&self.raw_j_inv(&rhs))
    }

    pub fn beta(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_beta(w.values())?)
    }

    pub fn F(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_f(w.values()))
    }

    pub fn F_inverse(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_f_inv(w.values()))
    }

    pub fn eta(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_eta(w.values())?)
    }

    pub fn J(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_j(w.values()))
    }

    pub fn J_inverse(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_j_inv(w.values()))
    }

    pub fn theta(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_theta(w.values())?)
    }

    pub fn P(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_p(w.values()))
    }

    pub fn P_inverse(&self, w: &Section) -> Result<Section, SolverError> {
        self.check(w)?;
        self.section(self.raw_p_inv(w.values())?)
    }

    pub fn Phi(&self, omega: &Section) -> Result<Section, SolverError> {
        self.check(omega)?;
        self.section(self.raw_phi(omega.values())?)
    }

    pub fn norm1(&self, w: &Section) -> f64 {
        w.norm1_with(&self.proj)
    }
}

fn direct<F>(grid: &Grid, f: F) -> Result<Section, SolverError>
where
    F: Fn(&TorusPoint) -> Result<Vector, SolverError> + Sync,
{
    let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect::<Result<Vec<_>, _>>()?;
    Ok(Section::from_values(grid.clone(), values)?)
}

/// `Σᵢ Πᵢ(x) Πᵢ(h(x))`.
fn center_motion_matrix(s: &Splitting, x: &TorusPoint, hx: &TorusPoint) -> DMatrix<f64> {
    projector_sum(&s.projectors_at(x), &s.projectors_at(hx))
}

/// `β(w)(x) = exp_x⁻¹ f(exp_{f⁻¹x} w(f⁻¹x))`.
/// The base point is taken as `f(f⁻¹x)` so that `β(0) = 0` holds exactly.
pub fn op_beta(f: &MapSpec, w: &Section) -> Result<Section, SolverError> {
    let geometry = f.geometry();
    let const_df = f.constant_differential().map(|m| m.to_float());
    direct(w.grid(), |x| {
        let p = f.inverse(x);
        let wp = w.eval_vector(&p);
        if wp.norm() >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(wp.norm()));
        }
        Ok(match &const_df {
            Some(a) => dynamics_catalog::mat_vec(a, &wp),
            None => geometry.displacement(&f.forward(&p), &f.forward(&p.translate(&wp))),
        })
    })
}

/// `(F w)(x) = Df(f⁻¹x) w(f⁻¹x)`.
pub fn op_F(f: &MapSpec, w: &Section) -> Result<Section, SolverError> {
    direct(w.grid(), |x| {
        let p = f.inverse(x);
        Ok(f.push(&p, &w.eval_vector(&p)))
    })
}

/// `η = β − F`; identically zero for maps with constant differential.
pub fn op_eta(f: &MapSpec, w: &Section) -> Result<Section, SolverError> {
    if f.constant_differential().is_some() {
        let s = w.sup_norm();
        if s >= INJECTIVITY_RADIUS {
            return Err(SolverError::Injectivity(s));
        }
        return Ok(Section::zeros(w.grid()));
    }
    let b = op_beta(f, w)?;
    let fw = op_F(f, w)?;
    Ok(&b - &fw)
}

/// `(J_h w)(x) = Σᵢ Πᵢ(x) Πᵢ(h x) w(h x)` on the flat torus.
pub fn op_Jh(h: &dyn PointMap, s: &Splitting, w: &Section) -> Result<Section, SolverError> {
    direct(w.grid(), |x| {
        let hx = h.forward(x);
        let m = center_motion_matrix(s, x, &hx);
        Ok(dynamics_catalog::mat_vec(&m, &w.eval_vector(&hx)))
    })
}

/// `(J_h⁻¹ w)(x) = M(h⁻¹x)⁻¹ w(h⁻¹x)` with `M` the matrix of [`op_Jh`].
pub fn op_Jh_inverse(h: &dyn PointMap, s: &Splitting, w: &Section) -> Result<Section, SolverError> {
    direct(w.grid(), |x| {
        let y = h.inverse(x);
        let m = center_motion_matrix(s, &y, x)
            .try_inverse()
            .ok_or_else(|| SolverError::Unsupported("singular center-motion matrix".into()))?;
        Ok(dynamics_catalog::mat_vec(&m, &w.eval_vector(&y)))
    })
}

/// `θ_h(w)(x) = exp_x⁻¹(exp_{h x} w(h x)) − (J_h w)(x)` on the flat torus.
pub fn op_thetah(h: &dyn PointMap, s: &Splitting, w: &Section) -> Result<Section, SolverError> {
    let grid = w.grid();
    let reach = w.sup_norm()
        + (0..grid.len()).map(|i| grid.node(i).displacement_to(&h.forward(&grid.node(i))).norm()).fold(0.0, f64::max);
    if reach >= INJECTIVITY_RADIUS {
        return Err(SolverError::Injectivity(reach));
    }
    let jw = op_Jh(h, s, w)?;
    direct(grid, |x| {
        let hx = h.forward(x);
        Ok(x.displacement_to(&hx.translate(&w.eval_vector(&hx))))
    })
    .map(|moved| &moved - &jw)
}

/// `P_h ω = −J_h⁻¹ u + (I − J_h⁻¹ F) v`.
pub fn op_Ph(f: &MapSpec, h: &dyn PointMap, s: &Splitting, w: &Section) -> Result<Section, SolverError> {
    Operators::new(f, h, s, w.grid(), NeumannDepth::Auto, 1e-12)?.P(w)
}

/// Block-wise Neumann inverse of [`op_Ph`].
pub fn op_Ph_inverse(
    f: &MapSpec,
    h: &dyn PointMap,
    s: &Splitting,
    w: &Section,
    depth: NeumannDepth,
) -> Result<Section, SolverError> {
    Operators::new(f, h, s, w.grid(), depth, 1e-12)?.P_inverse(w)
}

/// `Φ_h(u + v) = P_h⁻¹ J_h⁻¹ (η(v) − θ_h(v))`.
pub fn op_Phi(f: &MapSpec, h: &dyn PointMap, s: &Splitting, omega: &Section) -> Result<Section, SolverError> {
    Operators::new(f, h, s, omega.grid(), NeumannDepth::Auto, 1e-12)?.Phi(omega)
}
