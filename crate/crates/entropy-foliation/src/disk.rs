//! Volume growth of iterated unstable disks.
//!
//! A disk is carried as parameter/position pairs. After each push through
//! `f`, any segment (or triangle edge) longer than the cap is split at the
//! parameter midpoint, and the new point is recomputed from its parameter,
//! so curvature picked up along the orbit is resolved rather than
//! interpolated. The seed disk is cut into chunks of cap size that evolve
//! independently, which bounds memory.

use std::f64::consts::TAU;

use dynamics_catalog::{Geometry, MapSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splitting::Splitting;
use torus_geometry::{TorusPoint, Vector};

use crate::{fit_slope, EntropyError};

/// Longest segment or triangle edge kept after refinement.
pub const SEGMENT_CAP: f64 = 1.0 / 64.0;
/// Element budget per disk over all chunks.
const ELEMENT_BUDGET: usize = 40_000_000;
/// Fan triangles of the seed polygon for two-dimensional disks.
const FAN: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub n_values: Vec<usize>,
    /// Arc length (`dᵤ = 1`) or area (`dᵤ = 2`) of `fⁿ` of the seed disk.
    pub volumes: Vec<f64>,
    /// Least-squares slope of `log volume` over the last half of the series.
    pub slope: f64,
    pub dim_u: usize,
    /// Segments or triangles in the last complete step.
    pub elements: usize,
    /// The element budget ran out; the series stops early.
    pub truncated: bool,
}

impl GrowthSeries {
    fn new(volumes: Vec<f64>, dim_u: usize, elements: usize, truncated: bool) -> Self {
        let n_values: Vec<usize> = (0..volumes.len()).collect();
        let start = n_values.len() / 2;
        let x: Vec<f64> = n_values[start..].iter().map(|&n| n as f64).collect();
        let y: Vec<f64> = volumes[start..].iter().map(|v| v.ln()).collect();
        let slope = fit_slope(&x, &y);
        GrowthSeries { n_values, volumes, slope, dim_u, elements, truncated }
    }
}

fn iterate_n(f: &MapSpec, mut p: TorusPoint, n: usize) -> TorusPoint {
    for _ in 0..n {
        p = f.forward(&p);
    }
    p
}

/// Outcome of one chunk: volume per step, last element count, truncation.
struct ChunkRun {
    volumes: Vec<f64>,
    elements: usize,
    truncated: bool,
}

fn sum_runs(runs: Vec<ChunkRun>, n_max: usize) -> (Vec<f64>, usize, bool) {
    let steps = runs.iter().map(|r| r.volumes.len()).min().unwrap_or(0).min(n_max + 1);
    let mut volumes = vec![0.0; steps];
    let mut elements = 0;
    let mut truncated = false;
    for r in &runs {
        for (v, x) in volumes.iter_mut().zip(&r.volumes) {
            *v += x;
        }
        elements += r.elements;
        truncated |= r.truncated;
    }
    (volumes, elements, truncated)
}

struct Curve<'a> {
    f: &'a MapSpec,
    geometry: Geometry,
    x: TorusPoint,
    e: Vector,
    cap: f64,
}

impl Curve<'_> {
    fn seed(&self, t: f64, n: usize) -> TorusPoint {
        iterate_n(self.f, self.x.translate(&(self.e * t)), n)
    }

    fn len(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        self.geometry.dist(a, b)
    }

    /// Bisect `[a, b]` at step `n` until every segment is below the cap;
    /// pushes everything after `a` onto `out`.
    fn refine(
        &self,
        a: (f64, TorusPoint),
        b: (f64, TorusPoint),
        n: usize,
        stack: &mut Vec<(f64, TorusPoint)>,
        out: &mut Vec<(f64, TorusPoint)>,
    ) {
        stack.push(b);
        let mut left = a;
        while let Some(right) = stack.pop() {
            if self.len(&left.1, &right.1) <= self.cap {
                out.push(right);
                left = right;
            } else {
                let t = 0.5 * (left.0 + right.0);
                stack.push(right);
                stack.push((t, self.seed(t, n)));
            }
        }
    }

    fn run(&self, t0: f64, t1: f64, n_max: usize, budget: usize) -> ChunkRun {
        let mut stack = Vec::new();
        let mut pts = vec![(t0, self.seed(t0, 0))];
        self.refine(pts[0], (t1, self.seed(t1, 0)), 0, &mut stack, &mut pts);
        let mut volumes = vec![self.volume(&pts)];
        let mut elements = pts.len() - 1;
        for n in 1..=n_max {
            let mapped: Vec<(f64, TorusPoint)> = pts.iter().map(|(t, p)| (*t, self.f.forward(p))).collect();
            let mut next = Vec::with_capacity(mapped.len() * 3);
            next.push(mapped[0]);
            for w in mapped.windows(2) {
                self.refine(w[0], w[1], n, &mut stack, &mut next);
                if next.len() > budget {
                    return ChunkRun { volumes, elements, truncated: true };
                }
            }
            pts = next;
            elements = pts.len() - 1;
            volumes.push(self.volume(&pts));
        }
        ChunkRun { volumes, elements, truncated: false }
    }

    fn volume(&self, pts: &[(f64, TorusPoint)]) -> f64 {
        pts.windows(2).map(|w| self.len(&w[0].1, &w[1].1)).sum()
    }
}

#[derive(Clone, Copy)]
struct Tri {
    uv: [[f64; 2]; 3],
    p: [TorusPoint; 3],
}

struct Patch<'a> {
    f: &'a MapSpec,
    geometry: Geometry,
    x: TorusPoint,
    e: [Vector; 2],
    cap: f64,
}

impl Patch<'_> {
    fn seed(&self, uv: [f64; 2], n: usize) -> TorusPoint {
        iterate_n(self.f, self.x.translate(&(self.e[0] * uv[0] + self.e[1] * uv[1])), n)
    }

    fn edges(&self, t: &Tri) -> [Vector; 3] {
        let g = &self.geometry;
        [g.displacement(&t.p[0], &t.p[1]), g.displacement(&t.p[1], &t.p[2]), g.displacement(&t.p[2], &t.p[0])]
    }

    fn area(&self, t: &Tri) -> f64 {
        let [a, _, c] = self.edges(t);
        let b = -c;
        let (aa, bb, ab) = (a.dot(&a), b.dot(&b), a.dot(&b));
        0.5 * (aa * bb - ab * ab).max(0.0).sqrt()
    }

    fn refine(&self, t: Tri, n: usize, out: &mut Vec<Tri>) {
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            if self.edges(&t).iter().all(|e| e.norm() <= self.cap) {
                out.push(t);
                continue;
            }
            let mid = |i: usize, j: usize| [0.5 * (t.uv[i][0] + t.uv[j][0]), 0.5 * (t.uv[i][1] + t.uv[j][1])];
            let m = [mid(0, 1), mid(1, 2), mid(2, 0)];
            let q = [self.seed(m[0], n), self.seed(m[1], n), self.seed(m[2], n)];
            stack.push(Tri { uv: [t.uv[0], m[0], m[2]], p: [t.p[0], q[0], q[2]] });
            stack.push(Tri { uv: [m[0], t.uv[1], m[1]], p: [q[0], t.p[1], q[1]] });
            stack.push(Tri { uv: [m[2], m[1], t.uv[2]], p: [q[2], q[1], t.p[2]] });
            stack.push(Tri { uv: [m[0], m[1], m[2]], p: [q[0], q[1], q[2]] });
        }
    }

    fn run(&self, start: Tri, n_max: usize, budget: usize) -> ChunkRun {
        let mut tris = vec![start];
        let mut volumes = vec![tris.iter().map(|t| self.area(t)).sum()];
        for n in 1..=n_max {
            let mut next = Vec::with_capacity(tris.len() * 4);
            for t in &tris {
                let mapped =
                    Tri { uv: t.uv, p: [self.f.forward(&t.p[0]), self.f.forward(&t.p[1]), self.f.forward(&t.p[2])] };
                self.refine(mapped, n, &mut next);
                if next.len() > budget {
                    return ChunkRun { volumes, elements: tris.len(), truncated: true };
                }
            }
            tris = next;
            volumes.push(tris.iter().map(|t| self.area(t)).sum());
        }
        ChunkRun { volumes, elements: tris.len(), truncated: false }
    }
}

/// Push the unstable disk of radius `r` at `x` (the affine disk spanned by
/// `E^u(x)`) through `f` for `n_max` steps, refining to segment length
/// `cap`, and record its volume after every step.
pub fn iterate_unstable_disk(
    f: &MapSpec,
    s: &Splitting,
    x: &TorusPoint,
    r: f64,
    n_max: usize,
    cap: f64,
) -> Result<GrowthSeries, EntropyError> {
    if !(r > 0.0 && r < 0.25) {
        return Err(EntropyError::Params(format!("disk radius {r} not in (0, 1/4)")));
    }
    if !(cap > 0.0 && cap < 0.25) {
        return Err(EntropyError::Params(format!("segment cap {cap} not in (0, 1/4)")));
    }
    if s.dim() != f.dim() {
        return Err(EntropyError::Params("splitting and map act on different tori".into()));
    }
    let frame = s.frame_at(x);
    let du = frame.basis_u.ncols();
    let geometry = f.geometry();
    let column = |j: usize| Vector::from_slice(frame.basis_u.column(j).as_slice());
    match du {
        1 => {
            let curve = Curve { f, geometry, x: *x, e: column(0), cap };
            let chunks = (2.0 * r / cap).ceil().max(1.0) as usize;
            let budget = ELEMENT_BUDGET / chunks;
            let h = 2.0 * r / chunks as f64;
            let runs: Vec<ChunkRun> = (0..chunks)
                .into_par_iter()
                .map(|i| curve.run(-r + h * i as f64, -r + h * (i + 1) as f64, n_max, budget))
                .collect();
            let (volumes, elements, truncated) = sum_runs(runs, n_max);
            Ok(GrowthSeries::new(volumes, 1, elements, truncated))
        }
        2 => {
            let patch = Patch { f, geometry, x: *x, e: [column(0), column(1)], cap };
            let corner = |k: usize| {
                let a = TAU * k as f64 / FAN as f64;
                [r * a.cos(), r * a.sin()]
            };
            let mut seeds = Vec::new();
            for k in 0..FAN {
                let uv = [[0.0, 0.0], corner(k), corner(k + 1)];
                let t = Tri { uv, p: [patch.seed(uv[0], 0), patch.seed(uv[1], 0), patch.seed(uv[2], 0)] };
                patch.refine(t, 0, &mut seeds);
            }
            let budget = ELEMENT_BUDGET / seeds.len();
            let runs: Vec<ChunkRun> = seeds.par_iter().map(|t| patch.run(*t, n_max, budget)).collect();
            let (volumes, elements, truncated) = sum_runs(runs, n_max);
            Ok(GrowthSeries::new(volumes, 2, elements, truncated))
        }
        _ => Err(EntropyError::Unsupported(format!("unstable dimension {du}; disks need 1 or 2"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub r: f64,
    pub n_max: usize,
    /// Largest slope over the seed points at radius `r`.
    pub value: f64,
    /// The same at radius `r/2`.
    pub value_half: f64,
    /// `|value − value_half|`, a check that the rate does not depend on `r`.
    pub spread: f64,
    pub slopes: Vec<f64>,
    pub slopes_half: Vec<f64>,
    pub truncated: bool,
}

/// `sup_x` of the unstable volume growth rate over `points`, at radii `r`
/// and `r/2`.
pub fn chi_u(
    f: &MapSpec,
    s: &Splitting,
    points: &[TorusPoint],
    r: f64,
    n_max: usize,
) -> Result<ChiEstimate, EntropyError> {
    if points.is_empty() {
        return Err(EntropyError::Params("no sample points".into()));
    }
    let mut truncated = false;
    let mut slopes_at = |radius: f64| -> Result<Vec<f64>, EntropyError> {
        let mut out = Vec::with_capacity(points.len());
        for x in points {
            let g = iterate_unstable_disk(f, s, x, radius, n_max, SEGMENT_CAP)?;
            truncated |= g.truncated;
            out.push(g.slope);
        }
        Ok(out)
    };
    let slopes = slopes_at(r)?;
    let slopes_half = slopes_at(r / 2.0)?;
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (value, value_half) = (max(&slopes), max(&slopes_half));
    Ok(ChiEstimate { r, n_max, value, value_half, spread: (value - value_half).abs(), slopes, slopes_half, truncated })
}

/// Uniform random points on `T^d`.
pub(crate) fn random_points(d: usize, count: usize, seed: u64) -> Vec<TorusPoint> {
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
