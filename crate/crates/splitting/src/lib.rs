//! Invariant splittings `E^s ⊕ E^c ⊕ E^u` of the catalog maps, their oblique
//! projections, and the hyperbolicity constants `λ, λ', μ', μ, L`.
//!
//! Constants use the normalization `C = 1`: for `v ∈ E^s`, `|Df^n v| ≤ λ^n |v|`,
//! for center vectors `λ'^n |v| ≤ |Df^n v| ≤ μ'^n |v|`, and for `v ∈ E^u`,
//! `|Df^{-n} v| ≤ μ^{-n} |v|`. Without a center, `λ' = μ' = 1`.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use torus_geometry::{Grid, TangentVector, TorusPoint, Vector};

use dynamics_catalog::{mat_vec, MapSpec};

mod estimate;
mod frame;
mod verify;

pub use estimate::{
    estimate_frame_at, estimate_splitting, estimate_splitting_seeded, growth_rates, DEFAULT_ORBIT_LENGTH,
};
pub use frame::{orthonormalize, range, Frame, Which};
pub use verify::{verify_hyperbolicity, HyperbolicityReport};

/// Random unit vectors used to measure `L`.
pub const L_SAMPLES: usize = 100_000;
/// Safety factor applied to the measured `L` downstream.
pub const L_MARGIN: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplittingError {
    #[error("exact splitting needs a map with constant integer differential")]
    NotLinear,
    #[error("eigenvalue modulus {0} lies on the boundary of the center band")]
    BandBoundary(f64),
    #[error("subspace dimensions ({ds}, {dc}, {du}) do not sum to {d}")]
    Dimensions { ds: usize, dc: usize, du: usize, d: usize },
    #[error("subspaces are not complementary")]
    Degenerate,
    #[error("no spectral gap: {0}")]
    NoGap(String),
}

/// Hyperbolicity constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub lambda_c: f64,
    pub mu_c: f64,
    pub mu: f64,
    /// Measured `max (|Π^c w| + |(Π^s + Π^u) w|)` over unit `w`.
    pub l: f64,
    /// `sup_x (‖Π^c(x)‖ + ‖Π^s(x) + Π^u(x)‖)` in operator norm; bounds the
    /// ratio of sup norms `‖w‖₁ / ‖w‖` for sections, where the two parts may
    /// peak at different points.
    pub l_sup: f64,
}

impl Constants {
    /// `L` with the safety margin used by solver guards.
    pub fn l_guard(&self) -> f64 {
        self.l * L_MARGIN
    }

    /// `l_sup` with the same safety margin.
    pub fn l_sup_guard(&self) -> f64 {
        self.l_sup * L_MARGIN
    }

    /// `0 < λ < 1 < μ` and `λ < λ' ≤ μ' < μ`.
    pub fn check_ordering(&self) -> Result<(), SplittingError> {
        let Constants { lambda, lambda_c, mu_c, mu, .. } = *self;
        let ok = 0.0 < lambda && lambda < 1.0 && 1.0 < mu && lambda < lambda_c && lambda_c <= mu_c && mu_c < mu;
        if ok {
            Ok(())
        } else {
            Err(SplittingError::NoGap(format!("λ={lambda:.6}, λ'={lambda_c:.6}, μ'={mu_c:.6}, μ={mu:.6}")))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Representation {
    Constant(Frame),
    PerGridPoint { grid: Grid, frames: Vec<Frame> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Splitting {
    dim: usize,
    dims: (usize, usize, usize),
    representation: Representation,
    constants: Constants,
}

impl Splitting {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(d_s, d_c, d_u)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.representation, Representation::Constant(_))
    }

    /// Frame at `x`. Per-grid splittings interpolate the projections
    /// multilinearly between nodes.
    pub fn frame_at(&self, x: &TorusPoint) -> Frame {
        match &self.representation {
            Representation::Constant(f) => f.clone(),
            Representation::PerGridPoint { grid, frames } => {
                let st = grid.stencil(x).compact();
                if st.len == 1 {
                    return frames[st.index[0]].clone();
                }
                let d = self.dim;
                let mut ps = DMatrix::zeros(d, d);
                let mut pc = DMatrix::zeros(d, d);
                let mut pu = DMatrix::zeros(d, d);
                for (i, w) in st.entries() {
                    ps += &frames[i].proj_s * w;
                    pc += &frames[i].proj_c * w;
                    pu += &frames[i].proj_u * w;
                }
                Frame::from_projections(ps, pc, pu, self.dims)
            }
        }
    }

    /// The three projections at `x`, without rebuilding bases.
    pub fn projectors_at(&self, x: &TorusPoint) -> [DMatrix<f64>; 3] {
        match &self.representation {
            Representation::Constant(f) => [f.proj_s.clone(), f.proj_c.clone(), f.proj_u.clone()],
            Representation::PerGridPoint { grid, frames } => {
                let d = self.dim;
                let mut out = [DMatrix::zeros(d, d), DMatrix::zeros(d, d), DMatrix::zeros(d, d)];
                for (i, w) in grid.stencil(x).entries() {
                    if w == 0.0 {
                        continue;
                    }
                    out[0] += &frames[i].proj_s * w;
                    out[1] += &frames[i].proj_c * w;
                    out[2] += &frames[i].proj_u * w;
                }
                out
            }
        }
    }

    /// Oblique projection of `w` onto `E^which(x)`.
    pub fn project(&self, x: &TorusPoint, w: &TangentVector, which: Which) -> TangentVector {
        let idx = match which {
            Which::S => 0,
            Which::C => 1,
            Which::U => 2,
        };
        let p = &self.projectors_at(x)[idx];
        TangentVector { base: *x, components: mat_vec(p, &w.components) }
    }

    /// `|Π^c w| + |(Π^s + Π^u) w|` at `x`.
    pub fn norm1_pointwise(&self, x: &TorusPoint, w: &Vector) -> f64 {
        let [_, pc, _] = self.projectors_at(x);
        let c = mat_vec(&pc, w);
        c.norm() + (*w - c).norm()
    }
}

/// Assemble a splitting, measure `L`, and enforce the ordering of constants.
fn finish(
    dim: usize,
    dims: (usize, usize, usize),
    representation: Representation,
    constants: Constants,
    seed: u64,
) -> Result<Splitting, SplittingError> {
    constants.check_ordering()?;
    let mut s = Splitting { dim, dims, representation, constants };
    s.constants.l = measure_l(&s, L_SAMPLES, seed);
    s.constants.l_sup = measure_l_sup(&s, seed);
    Ok(s)
}

/// `sup_x (‖Π^c(x)‖ + ‖I − Π^c(x)‖)` over stored frames and random points.
pub fn measure_l_sup(s: &Splitting, seed: u64) -> f64 {
    let split_norm = |pc: &DMatrix<f64>| {
        let id = DMatrix::<f64>::identity(pc.nrows(), pc.ncols());
        pc.clone().svd(false, false).singular_values.max() + (id - pc).svd(false, false).singular_values.max()
    };
    match &s.representation {
        Representation::Constant(f) => split_norm(&f.proj_c),
        Representation::PerGridPoint { frames, .. } => {
            let nodes = frames.par_iter().map(|f| split_norm(&f.proj_c)).reduce(|| 1.0, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x15);
            let points: Vec<TorusPoint> = (0..1024).map(|_| random_point(&mut rng, s.dim)).collect();
            let off = points.par_iter().map(|x| split_norm(&s.projectors_at(x)[1])).reduce(|| 1.0, f64::max);
            nodes.max(off)
        }
    }
}

/// `max (|Π^c w| + |(Π^s + Π^u) w|)` over random unit vectors at random points.
pub fn measure_l(s: &Splitting, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = s.dim;
    let mut worst: f64 = 1.0;
    let per_point = match s.representation {
        Representation::Constant(_) => samples,
        Representation::PerGridPoint { .. } => 64,
    };
    let mut done = 0;
    while done < samples {
        let x = random_point(&mut rng, d);
        let [_, pc, _] = s.projectors_at(&x);
        for _ in 0..per_point.min(samples - done) {
            let w = random_unit(&mut rng, d);
            let c = mat_vec(&pc, &w);
            worst = worst.max(c.norm() + (w - c).norm());
            done += 1;
        }
    }
    worst
}

pub(crate) fn random_point(rng: &mut impl Rng, d: usize) -> TorusPoint {
    let mut v = Vector::zeros(d);
    for i in 0..d {
        v[i] = rng.random::<f64>();
    }
    TorusPoint::wrapped(v)
}

pub(crate) fn random_unit(rng: &mut impl Rng, d: usize) -> Vector {
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

/// Constant splitting of a map with constant integer differential, grouping
/// eigenvalues by modulus: below `band.0` stable, inside `[band.0, band.1]`
/// center, above `band.1` unstable. A degenerate band `[a, a]` captures the
/// moduli equal to `a` to within `1e-9`; for a proper band, moduli within
/// `1e-9` of either end are rejected.
pub fn exact_splitting(f: &MapSpec, band: (f64, f64)) -> Result<Splitting, SplittingError> {
    exact_splitting_seeded(f, band, 0)
}

pub fn exact_splitting_seeded(f: &MapSpec, band: (f64, f64), seed: u64) -> Result<Splitting, SplittingError> {
    let m = f.constant_differential().ok_or(SplittingError::NotLinear)?.to_float();
    let d = m.nrows();
    let (a, b) = band;
    let tol = 1e-9;
    let eigen: Vec<Complex<f64>> = m.complex_eigenvalues().iter().cloned().collect();
    let mut class = Vec::with_capacity(d);
    for l in &eigen {
        let r = l.norm();
        let w = if (b - a).abs() <= tol {
            if (r - a).abs() <= tol {
                Which::C
            } else if r < a {
                Which::S
            } else {
                Which::U
            }
        } else {
            if (r - a).abs() <= tol || (r - b).abs() <= tol {
                return Err(SplittingError::BandBoundary(r));
            }
            if r < a {
                Which::S
            } else if r > b {
                Which::U
            } else {
                Which::C
            }
        };
        class.push(w);
    }
    let basis = |which: Which| -> DMatrix<f64> {
        // range of the product of factors that annihilate the other groups
        let mut p = DMatrix::<f64>::identity(d, d);
        let count = class.iter().filter(|&&c| c == which).count();
        for (l, &c) in eigen.iter().zip(&class) {
            if c == which {
                continue;
            }
            let factor = if l.im.abs() < 1e-12 {
                &m - DMatrix::identity(d, d) * l.re
            } else if l.im > 0.0 {
                &m * &m - &m * (2.0 * l.re) + DMatrix::identity(d, d) * l.norm_sqr()
            } else {
                continue;
            };
            p = factor * p;
        }
        range(&p, count)
    };
    let frame = Frame::from_bases(&basis(Which::S), &basis(Which::C), &basis(Which::U))?;
    let moduli = |which: Which| -> Vec<f64> {
        eigen.iter().zip(&class).filter(|(_, &c)| c == which).map(|(l, _)| l.norm()).collect()
    };
    let (ms, mc, mu) = (moduli(Which::S), moduli(Which::C), moduli(Which::U));
    let constants = Constants {
        lambda: ms.iter().cloned().fold(0.0, f64::max),
        lambda_c: if mc.is_empty() { 1.0 } else { mc.iter().cloned().fold(f64::INFINITY, f64::min) },
        mu_c: if mc.is_empty() { 1.0 } else { mc.iter().cloned().fold(0.0, f64::max) },
        mu: mu.iter().cloned().fold(f64::INFINITY, f64::min),
        l: 1.0,
        l_sup: 1.0,
    };
    let dims = frame.dims();
    finish(d, dims, Representation::Constant(frame), constants, seed)
}

/// Per-node growth factors `(max |Df|_{E^s}|, min, max |Df|_{E^c}|, min |Df|_{E^u}|)`.
pub(crate) fn growth_factors(f: &MapSpec, x: &TorusPoint, frame: &Frame) -> [f64; 4] {
    let df = f.differential(x);
    let sv = |b: &DMatrix<f64>| -> Option<(f64, f64)> {
        if b.ncols() == 0 {
            return None;
        }
        let s = (&df * b).singular_values();
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(0.0, f64::max);
        Some((lo, hi))
    };
    let s = sv(&frame.basis_s).map_or(0.0, |(_, hi)| hi);
    let (clo, chi) = sv(&frame.basis_c).unwrap_or((1.0, 1.0));
    let u = sv(&frame.basis_u).map_or(f64::INFINITY, |(lo, _)| lo);
    [s, clo, chi, u]
}

/// Constants as the extreme one-step growth factors over the given frames.
pub(crate) fn constants_from_frames(f: &MapSpec, points: &[TorusPoint], frames: &[Frame]) -> Constants {
    let factors: Vec<[f64; 4]> =
        points.par_iter().zip(frames.par_iter()).map(|(x, fr)| growth_factors(f, x, fr)).collect();
    let mut c = Constants { lambda: 0.0, lambda_c: f64::INFINITY, mu_c: 0.0, mu: f64::INFINITY, l: 1.0, l_sup: 1.0 };
    for [s, clo, chi, u] in factors {
        c.lambda = c.lambda.max(s);
        c.lambda_c = c.lambda_c.min(clo);
        c.mu_c = c.mu_c.max(chi);
        c.mu = c.mu.min(u);
    }
    c
}

pub(crate) use finish as finish_splitting;
