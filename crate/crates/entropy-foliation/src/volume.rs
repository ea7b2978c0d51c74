//! Volume comparison between a `k`-manifold and its image under a
//! regular map, with the regularity constants measured on samples.

use dynamics_catalog::{Geometry, MapSpec};
use quasiconj_solver::{pi_refined, QuasiConjugacy};
use serde::{Deserialize, Serialize};
use splitting::{Splitting, Which, DEFAULT_ORBIT_LENGTH};
use torus_geometry::{TorusPoint, Vector};

use crate::holonomy::{rk4, slide, CenterField, Transversal};
use crate::{EntropyError, SEGMENT_CAP};

/// Points sampled for the ball volumes and the hypothesis checks.
const SAMPLES: usize = 256;
/// Largest gap allowed between `W′` and `ψ(W)`.
const COVER_TOL: f64 = 1e-6;
/// Distances below this count as a collapse of `ψ`.
const INJECTIVITY_TOL: f64 = 1e-9;

/// A compact piece of submanifold of a flat torus, as a polyline (`k = 1`)
/// or a triangulated patch (`k = 2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Manifold {
    Polyline(Vec<TorusPoint>),
    Patch { points: Vec<TorusPoint>, triangles: Vec<[usize; 3]> },
}

impl Manifold {
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Polyline(_) => 1,
            Manifold::Patch { .. } => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Manifold::Polyline(p) => p.windows(2).map(|w| w[0].displacement_to(&w[1]).norm()).sum(),
            Manifold::Patch { points, triangles } => triangles
                .iter()
                .map(|t| {
                    let (u, v) = edges(points, t);
                    area(&u, &v)
                })
                .sum(),
        }
    }

    /// The same combinatorics with every vertex moved by `psi`.
    pub fn map(&self, psi: &dyn Fn(&TorusPoint) -> TorusPoint) -> Manifold {
        match self {
            Manifold::Polyline(p) => Manifold::Polyline(p.iter().map(psi).collect()),
            Manifold::Patch { points, triangles } => {
                Manifold::Patch { points: points.iter().map(psi).collect(), triangles: triangles.clone() }
            }
        }
    }

    /// Centers and volumes of pieces of diameter at most about `size`.
    pub fn pieces(&self, size: f64) -> Vec<(TorusPoint, f64)> {
        let mut out = Vec::new();
        match self {
            Manifold::Polyline(p) => {
                for w in p.windows(2) {
                    let e = w[0].displacement_to(&w[1]);
                    let m = (e.norm() / size - 1e-9).ceil().max(1.0) as usize;
                    let len = e.norm() / m as f64;
                    for i in 0..m {
                        out.push((w[0].translate(&(e * ((i as f64 + 0.5) / m as f64))), len));
                    }
                }
            }
            Manifold::Patch { points, triangles } => {
                for t in triangles {
                    let (u, v) = edges(points, t);
                    let longest = u.norm().max(v.norm()).max((v - u).norm());
                    let m = (longest / size - 1e-9).ceil().max(1.0) as usize;
                    let a = area(&u, &v) / (m * m) as f64;
                    let o = points[t[0]];
                    let at = |s: f64, r: f64| o.translate(&(u * (s / m as f64) + v * (r / m as f64)));
                    for i in 0..m {
                        for j in 0..m - i {
                            let (s, r) = (i as f64, j as f64);
                            out.push((at(s + 1.0 / 3.0, r + 1.0 / 3.0), a));
                            if i + j + 1 < m {
                                out.push((at(s + 2.0 / 3.0, r + 2.0 / 3.0), a));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Ambient distance from `y` to the manifold.
    pub fn distance_to(&self, y: &TorusPoint) -> f64 {
        match self {
            Manifold::Polyline(p) => p
                .windows(2)
                .map(|w| segment_distance(&w[0].displacement_to(&w[1]), &w[0].displacement_to(y)))
                .fold(f64::INFINITY, f64::min),
            Manifold::Patch { points, triangles } => triangles
                .iter()
                .map(|t| {
                    let (u, v) = edges(points, t);
                    triangle_distance(&u, &v, &points[t[0]].displacement_to(y))
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn edges(points: &[TorusPoint], t: &[usize; 3]) -> (Vector, Vector) {
    (points[t[0]].displacement_to(&points[t[1]]), points[t[0]].displacement_to(&points[t[2]]))
}

fn area(u: &Vector, v: &Vector) -> f64 {
    let (uu, vv, uv) = (u.dot(u), v.dot(v), u.dot(v));
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}

/// Distance from `q` to the segment from the origin to `w`.
fn segment_distance(w: &Vector, q: &Vector) -> f64 {
    let ww = w.dot(w);
    let t = if ww > 0.0 { (q.dot(w) / ww).clamp(0.0, 1.0) } else { 0.0 };
    (*q - *w * t).norm()
}

/// Distance from `q` to the triangle with corners `0`, `u`, `v`.
fn triangle_distance(u: &Vector, v: &Vector, q: &Vector) -> f64 {
    let (uu, vv, uv) = (u.dot(u), v.dot(v), u.dot(v));
    let (qu, qv) = (q.dot(u), q.dot(v));
    let det = uu * vv - uv * uv;
    if det > 0.0 {
        let a = (qu * vv - qv * uv) / det;
        let b = (qv * uu - qu * uv) / det;
        if a >= 0.0 && b >= 0.0 && a + b <= 1.0 {
            return (*q - *u * a - *v * b).norm();
        }
    }
    segment_distance(u, q).min(segment_distance(v, q)).min(segment_distance(&(*v - *u), &(*q - *u)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeComparisonReport {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vol_w: f64,
    pub vol_w_prime: f64,
    /// `max Vol W′(y′, 2α) / (2α)^k` over sampled `y′`.
    pub c_upper: f64,
    /// `min Vol W(y, β) / β^k` over sampled `y`.
    pub c_lower: f64,
    /// `C̄ (2α)^k / (C̲ β^k)`.
    pub constant: f64,
    /// `ψ` separates every sampled pair of distinct points.
    pub injective: bool,
    /// Largest distance from a sampled point of `W′` to `ψ(W)`.
    pub cover_gap: f64,
    pub covers: bool,
    /// `ψ` maps every sampled `W(y, β)` into the `α`-ball about `ψ(y)`.
    pub regularity: bool,
    pub hypotheses_met: bool,
    /// `Vol W′ ≤ C Vol W`; meaningful only when the hypotheses hold.
    pub inequality_holds: bool,
}

impl VolumeComparisonReport {
    pub fn passed(&self) -> bool {
        self.hypotheses_met && self.inequality_holds
    }
}

fn stride_sample<T: Clone>(items: &[T], count: usize) -> Vec<T> {
    if items.len() <= count {
        return items.to_vec();
    }
    (0..count).map(|i| items[i * items.len() / count].clone()).collect()
}

fn ball_volume(pieces: &[(TorusPoint, f64)], y: &TorusPoint, radius: f64) -> f64 {
    pieces.iter().filter(|(p, _)| p.displacement_to(y).norm() < radius).map(|(_, v)| v).sum()
}

/// Check `Vol W′ ≤ C Vol W` for `ψ: W → W*` with `W′ ⊂ ψ(W)`, where the
/// constant comes from the ball volumes at scales `2α` on `W′` and `β` on
/// `W`, and the hypotheses on `ψ` are tested on samples.
pub fn volume_comparison_check(
    w: &Manifold,
    w_prime: &Manifold,
    psi: &dyn Fn(&TorusPoint) -> TorusPoint,
    alpha: f64,
    beta: f64,
) -> Result<VolumeComparisonReport, EntropyError> {
    if !(alpha > 0.0 && alpha < 0.25 && beta > 0.0 && beta < 0.25) {
        return Err(EntropyError::Params(format!("scales α = {alpha}, β = {beta} must lie in (0, 1/4)")));
    }
    if w.dim() != w_prime.dim() {
        return Err(EntropyError::Params("W and W′ have different dimensions".into()));
    }
    let k = w.dim() as i32;
    let size = alpha.min(beta) / 8.0;
    let w_pieces = w.pieces(size);
    let wp_pieces = w_prime.pieces(size);
    if w_pieces.is_empty() || wp_pieces.is_empty() {
        return Err(EntropyError::Params("empty manifold".into()));
    }
    let w_samples = stride_sample(&w_pieces, SAMPLES);
    let wp_samples = stride_sample(&wp_pieces, SAMPLES);

    let c_lower =
        w_samples.iter().map(|(y, _)| ball_volume(&w_pieces, y, beta)).fold(f64::INFINITY, f64::min) / beta.powi(k);
    let c_upper = wp_samples.iter().map(|(y, _)| ball_volume(&wp_pieces, y, 2.0 * alpha)).fold(0.0, f64::max)
        / (2.0 * alpha).powi(k);
    let constant = c_upper * (2.0 * alpha).powi(k) / (c_lower * beta.powi(k));

    let images: Vec<TorusPoint> = w_pieces.iter().map(|(p, _)| psi(p)).collect();
    let sample_ids: Vec<usize> = stride_sample(&(0..w_pieces.len()).collect::<Vec<_>>(), SAMPLES);
    let mut injective = true;
    for (a, &i) in sample_ids.iter().enumerate() {
        for &j in &sample_ids[a + 1..] {
            let apart = w_pieces[i].0.displacement_to(&w_pieces[j].0).norm() > INJECTIVITY_TOL;
            if apart && images[i].displacement_to(&images[j]).norm() <= INJECTIVITY_TOL {
                injective = false;
            }
        }
    }
    let regularity = sample_ids.iter().all(|&i| {
        let y = &w_pieces[i].0;
        w_pieces
            .iter()
            .zip(&images)
            .filter(|((z, _), _)| z.displacement_to(y).norm() < beta)
            .all(|(_, img)| img.displacement_to(&images[i]).norm() < alpha)
    });
    let psi_w = w.map(psi);
    let cover_gap = wp_samples.iter().map(|(y, _)| psi_w.distance_to(y)).fold(0.0, f64::max);
    let covers = cover_gap <= COVER_TOL;

    let (vol_w, vol_w_prime) = (w.volume(), w_prime.volume());
    Ok(VolumeComparisonReport {
        k: k as usize,
        alpha,
        beta,
        vol_w,
        vol_w_prime,
        c_upper,
        c_lower,
        constant,
        injective,
        cover_gap,
        covers,
        regularity,
        hypotheses_met: injective && covers && regularity,
        inequality_holds: vol_w_prime <= constant * vol_w,
    })
}

/// Direction field of the one-dimensional unstable bundle of `f`.
fn unstable_field(f: &MapSpec, s: &Splitting) -> Result<CenterField, EntropyError> {
    let dims = s.dims();
    if dims.2 != 1 {
        return Err(EntropyError::Unsupported(format!("unstable dimension {}; the comparison needs 1", dims.2)));
    }
    if s.is_constant() && f.constant_differential().is_some() {
        let frame = s.frame_at(&TorusPoint::origin(f.dim()));
        return Ok(CenterField::Constant(Vector::from_slice(frame.basis_u.column(0).as_slice())));
    }
    Ok(CenterField::Estimated { map: f.clone(), orbit_length: DEFAULT_ORBIT_LENGTH, dims, which: Which::U })
}

/// `f^n` of the unstable arc of radius `r` about `x`, as a polyline whose
/// edges are at most [`SEGMENT_CAP`] long.
fn pushed_leaf(
    f: &MapSpec,
    field: &CenterField,
    x: &TorusPoint,
    r: f64,
    n: usize,
) -> Result<Vec<TorusPoint>, EntropyError> {
    const SEEDS: usize = 16;
    let push = |p: &TorusPoint| (0..n).fold(*p, |q, _| f.forward(&q));
    let d = x.dim();
    let e = field.direction(x, &Vector::axis(d, 0))?;
    // (arc parameter, point, image)
    let mut seeds: Vec<(f64, TorusPoint, TorusPoint)> = Vec::with_capacity(2 * SEEDS + 1);
    for sign in [-1.0, 1.0] {
        let h = r / SEEDS as f64;
        let mut y = *x;
        let mut along = e * sign;
        for i in 1..=SEEDS {
            let (next, k1) = rk4(field, &y, &along, h)?;
            along = k1;
            y = next;
            seeds.push((sign * h * i as f64, y, push(&y)));
        }
    }
    seeds.push((0.0, *x, push(x)));
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out = vec![seeds[0].2];
    for w in seeds.windows(2) {
        let mut stack = vec![(w[1], w[0])];
        while let Some((b, a)) = stack.pop() {
            if a.2.displacement_to(&b.2).norm() <= SEGMENT_CAP || b.0 - a.0 < 1e-12 {
                out.push(b.2);
                continue;
            }
            let half = (b.0 - a.0) / 2.0;
            let mid = rk4(field, &a.1, &a.1.displacement_to(&b.1), half)?.0;
            let m = (a.0 + half, mid, push(&mid));
            stack.push((b, m));
            stack.push((m, a));
        }
    }
    Ok(out)
}

/// Compare `W = g^n W^u_g(x, r)` with `W′ = f^n W^u_f(π x, r/2)` through
/// `ψ = θ ∘ π`, where `θ` slides along the center leaves of `f` onto the
/// us-plane through `f^n(π x)` (the identity without center).
#[allow(clippy::too_many_arguments)]
pub fn unstable_comparison(
    f: &MapSpec,
    g: &MapSpec,
    q: &QuasiConjugacy,
    x: &TorusPoint,
    r: f64,
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<VolumeComparisonReport, EntropyError> {
    if !(r > 0.0 && r < 0.25) {
        return Err(EntropyError::Params(format!("radius {r} not in (0, 1/4)")));
    }
    if f.geometry() != Geometry::Flat || g.geometry() != Geometry::Flat {
        return Err(EntropyError::Unsupported("volume comparison runs on flat tori only".into()));
    }
    let s = &q.splitting;
    let dc = s.dims().1;
    if dc > 1 {
        return Err(EntropyError::Unsupported(format!("center dimension {dc}")));
    }
    let g_field = unstable_field(g, s)?;
    let f_field = unstable_field(f, s)?;
    let pi = |p: &TorusPoint| pi_refined(q, f, g, p);
    let w = Manifold::Polyline(pushed_leaf(g, &g_field, x, r, n)?);
    let anchor = pi(x);
    let w_prime = Manifold::Polyline(pushed_leaf(f, &f_field, &anchor, r / 2.0, n)?);
    if dc == 0 {
        return volume_comparison_check(&w, &w_prime, &pi, alpha, beta);
    }
    let center = crate::holonomy::center_field_for(f, s)?;
    let end = (0..n).fold(anchor, |p, _| f.forward(&p));
    let plane = Transversal::us_plane(end, &s.frame_at(&end))?;
    let psi = |p: &TorusPoint| {
        let image = pi(p);
        slide(&center, &plane, &image).unwrap_or(image)
    };
    volume_comparison_check(&w, &w_prime, &psi, alpha, beta)
}
