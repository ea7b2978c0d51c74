//! Measured constants that decide whether `Φ` contracts the ball.

use dynamics_catalog::{operator_norm, MapSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splitting::Splitting;
use torus_geometry::{TorusPoint, Vector};

use crate::ops::{BlockRates, Operators};
use crate::PointMap;

/// Safety factor on sampled suprema.
const SAFETY: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    pub epsilon: f64,
    pub lambda: f64,
    pub l: f64,
    /// Lipschitz bound of `η` on the ball of radius `ε`.
    pub c_eps: f64,
    /// Lipschitz bound of `θ_h`.
    pub k_h: f64,
    /// `sup_x |exp_x⁻¹ h(x)|`.
    pub delta: f64,
    pub rates: BlockRates,
    /// `4L/(1−λ)`.
    pub a_priori_factor: f64,
    /// All inequalities hold with `a_priori_factor` and the a priori block bounds.
    pub a_priori_ok: bool,
    /// `‖P⁻¹‖ ‖J⁻¹‖` from measured block norms.
    pub measured_factor: f64,
    pub measured_ok: bool,
}

impl GuardReport {
    pub fn summary(&self) -> String {
        format!(
            "ε={:.3} C(ε)={:.3e} K(h)={:.3e} δ={:.3e} factor={:.3} (a priori {:.3}) q_s={:.4} q_u={:.4}",
            self.epsilon,
            self.c_eps,
            self.k_h,
            self.delta,
            self.measured_factor,
            self.a_priori_factor,
            self.rates.q_s,
            self.rates.q_u
        )
    }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> TorusPoint {
    let mut v = Vector::zeros(d);
    for i in 0..d {
        v[i] = rng.random::<f64>();
    }
    TorusPoint::wrapped(v)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    loop {
        let mut v = Vector::zeros(d);
        for i in 0..d {
            v[i] = rng.random::<f64>() * 2.0 - 1.0;
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// `2 · sup ‖Df(p + ξ) − Df(p)‖` over sampled `p` and `|ξ| ≤ ε`. The same
/// seed gives the same points and directions for every `ε`.
pub fn measure_c_eps(f: &MapSpec, epsilon: f64, samples: usize, seed: u64) -> f64 {
    if f.constant_differential().is_some() {
        return 0.0;
    }
    let d = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(TorusPoint, Vector)> = (0..samples)
        .map(|_| {
            let p = random_point(&mut rng, d);
            let r = rng.random::<f64>();
            (p, random_unit(&mut rng, d) * r)
        })
        .collect();
    let sup = draws
        .par_iter()
        .map(|(p, xi)| operator_norm(&(f.differential(&p.translate(&(*xi * epsilon))) - f.differential(p))))
        .reduce(|| 0.0, f64::max);
    SAFETY * sup
}

/// `2 · sup ‖I − Σᵢ Πᵢ(x) Πᵢ(h x)‖` over sampled `x`.
pub fn measure_k_h(h: &dyn PointMap, s: &Splitting, samples: usize, seed: u64) -> f64 {
    if s.is_constant() {
        return 0.0;
    }
    let d = s.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<TorusPoint> = (0..samples).map(|_| random_point(&mut rng, d)).collect();
    let sup = points
        .par_iter()
        .map(|x| {
            let a = s.projectors_at(x);
            let b = s.projectors_at(&h.forward(x));
            let m = &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2];
            operator_norm(&(DMatrix::identity(d, d) - m))
        })
        .reduce(|| 0.0, f64::max);
    SAFETY * sup
}

/// Check the contraction inequalities `factor·C(ε) < 1/4`,
/// `factor·δ < ε/4` and `factor·K(h) < 1/4`.
pub(crate) fn evaluate(
    ops: &Operators<'_>,
    f: &MapSpec,
    h: &dyn PointMap,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> GuardReport {
    let s = ops.splitting();
    let c = s.constants();
    let rates = *ops.rates();
    let c_eps = measure_c_eps(f, epsilon, samples, seed);
    let k_h = measure_k_h(h, s, samples, seed ^ 0x4b);
    let delta = rates.delta;
    let inequalities = |factor: f64| factor * c_eps < 0.25 && factor * delta < epsilon / 4.0 && factor * k_h < 0.25;

    let a_priori_factor = 4.0 * c.l_guard() / (1.0 - c.lambda);
    let j_bound = (2.0f64).min((1.0 + 1.0 / c.lambda) / 2.0);
    let r = (1.0 + c.lambda) / 2.0;
    let a_priori_ok =
        inequalities(a_priori_factor) && rates.j_norm.max(rates.j_inv_norm) <= j_bound && rates.q_s.max(rates.q_u) <= r;

    let measured_factor = rates.p_inverse_bound() * rates.j_inv_norm;
    let measured_ok = rates.q_s < 1.0 && rates.q_u < 1.0 && inequalities(measured_factor);

    GuardReport {
        epsilon,
        lambda: c.lambda,
        l: c.l,
        c_eps,
        k_h,
        delta,
        rates,
        a_priori_factor,
        a_priori_ok,
        measured_factor,
        measured_ok,
    }
}
