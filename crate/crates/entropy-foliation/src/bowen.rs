//! Separated-set entropy estimates.
//!
//! For each orbit length `k` a maximal `(k, ε)`-separated subset of a
//! jittered candidate cloud is built greedily. Candidates are bucketed by
//! the cells of their positions at times `0` and `k − 1`; for the catalog
//! systems closeness at both ends confines a pair to a Bowen ball, so
//! buckets stay small. The entropy estimate is the slope of `log N(k, ε)`
//! over the orbit lengths where the count is neither tiny nor saturated by
//! the finite cloud.

use dynamics_catalog::{Geometry, IntMatrix, MapSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use torus_geometry::{TorusPoint, Vector};

use crate::{fit_slope, EntropyError};

/// Counts below this are too coarse to fit.
const MIN_COUNT: usize = 8;
/// Counts above `cloud / SATURATION` are limited by the cloud.
const SATURATION: usize = 64;
/// Orbit lengths below this are transient.
const FIRST_FIT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenSeries {
    pub epsilon: f64,
    /// `N(k, ε)` for `k = 1, 2, …` until saturation or `n`.
    pub counts: Vec<usize>,
    /// First and last orbit length entering the fit.
    pub fit_range: Option<(usize, usize)>,
    pub slope: f64,
    /// Fewer than three usable orbit lengths.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenEstimate {
    pub n: usize,
    pub cloud: usize,
    pub series: Vec<BowenSeries>,
    /// Mean slope over the unflagged series, or over all when every one is flagged.
    pub estimate: f64,
    pub flagged: bool,
}

/// [`bowen_entropy_seeded`] with seed 42.
pub fn bowen_entropy(
    f: &MapSpec,
    n: usize,
    epsilon_list: &[f64],
    sample_budget: usize,
) -> Result<BowenEstimate, EntropyError> {
    bowen_entropy_seeded(f, n, epsilon_list, sample_budget, 42)
}

/// Separated-set entropy of `f` from a cloud of about `sample_budget`
/// jittered grid points, for orbit lengths up to `n`.
pub fn bowen_entropy_seeded(
    f: &MapSpec,
    n: usize,
    epsilon_list: &[f64],
    sample_budget: usize,
    seed: u64,
) -> Result<BowenEstimate, EntropyError> {
    if n < 2 {
        return Err(EntropyError::Params("orbit length must be at least 2".into()));
    }
    if epsilon_list.is_empty() || epsilon_list.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
        return Err(EntropyError::Params(format!("epsilon_list {epsilon_list:?} must lie in (0, 1/2)")));
    }
    let d = f.dim();
    let per_axis = ((sample_budget as f64).powf(1.0 / d as f64) + 1e-9).floor() as usize;
    if per_axis < 2 {
        return Err(EntropyError::Params(format!("sample budget {sample_budget} too small")));
    }
    let cloud = jittered_cloud(d, per_axis, seed);
    let series: Vec<BowenSeries> = epsilon_list.par_iter().map(|&eps| separated_series(f, &cloud, n, eps)).collect();
    let good: Vec<f64> = series.iter().filter(|s| !s.flagged).map(|s| s.slope).collect();
    let flagged = good.is_empty();
    let pool: Vec<f64> = if flagged { series.iter().map(|s| s.slope).collect() } else { good };
    let estimate = pool.iter().sum::<f64>() / pool.len() as f64;
    Ok(BowenEstimate { n, cloud: cloud.len(), series, estimate, flagged })
}

fn jittered_cloud(d: usize, m: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = m.pow(d as u32);
    let mut cloud: Vec<TorusPoint> = (0..total)
        .map(|mut flat| {
            let mut v = Vector::zeros(d);
            for i in 0..d {
                v[i] = ((flat % m) as f64 + rng.random::<f64>()) / m as f64;
                flat /= m;
            }
            TorusPoint::wrapped(v)
        })
        .collect();
    cloud.shuffle(&mut rng);
    cloud
}

/// Cell lookup at scale `ε`: any point within `ε` of a position lies in
/// one of the at most three cells per axis that meet `[x − ε, x + ε]`.
struct Cells {
    m: usize,
    d: usize,
    bits: u32,
    /// `None` for flat tori; base matrix and inverse across the seam otherwise.
    seam: Option<(IntMatrix, IntMatrix)>,
    eps: f64,
}

/// Cells met along one axis; `len` entries are valid.
#[derive(Clone, Copy, Default)]
struct AxisCells {
    cells: [i64; 3],
    len: usize,
}

impl Cells {
    fn new(geometry: &Geometry, d: usize, eps: f64) -> Self {
        let m = ((1.0 / eps).floor() as usize).max(1);
        let seam = match geometry {
            Geometry::Flat => None,
            Geometry::Suspension { base, base_inv } => Some((base.clone(), base_inv.clone())),
        };
        Cells { m, d, bits: 64 / (2 * d as u32), seam, eps }
    }

    fn cell(&self, t: f64) -> i64 {
        (t * self.m as f64).floor() as i64
    }

    /// Cell of a stored point, wrapped into range.
    fn home(&self, p: &TorusPoint, out: &mut [i64]) {
        for i in 0..self.d {
            out[i] = self.cell(p[i]).rem_euclid(self.m as i64);
        }
    }

    /// Coordinates of `q` as seen from points within `ε` of it, one entry
    /// per side of the seam.
    fn representatives(&self, q: &TorusPoint, out: &mut Vec<[f64; 4]>) {
        out.clear();
        let mut c = [0.0; 4];
        c[..self.d].copy_from_slice(q.coords());
        out.push(c);
        if let Some((base, base_inv)) = &self.seam {
            let v = self.d - 1;
            let b = Vector::from_slice(&q.coords()[..v]);
            if q[v] > 1.0 - self.eps {
                c[..v].copy_from_slice(base.apply(&b).as_slice());
                c[v] = q[v] - 1.0;
                out.push(c);
            }
            if q[v] < self.eps {
                c[..v].copy_from_slice(base_inv.apply(&b).as_slice());
                c[v] = q[v] + 1.0;
                out.push(c);
            }
        }
    }

    /// Candidate cells, per axis, for points within `ε` of `c`, own cell first.
    fn near(&self, c: &[f64; 4], out: &mut [AxisCells]) {
        let v = self.d - 1;
        let m = self.m as i64;
        for i in 0..self.d {
            let periodic = self.seam.is_none() || i < v;
            let x = if periodic { c[i] - c[i].floor() } else { c[i] };
            let (lo, hi) = (self.cell(x - self.eps), self.cell(x + self.eps));
            let own = self.cell(x);
            let mut axis = AxisCells::default();
            for k in std::iter::once(own).chain((lo..=hi).filter(|&k| k != own)) {
                let k = if periodic {
                    k.rem_euclid(m)
                } else if (0..m).contains(&k) {
                    k
                } else {
                    continue;
                };
                if !axis.cells[..axis.len].contains(&k) {
                    axis.cells[axis.len] = k;
                    axis.len += 1;
                }
            }
            out[i] = axis;
        }
    }

    fn key(&self, cells: &[i64]) -> u64 {
        cells.iter().fold(0u64, |k, &c| (k << self.bits) | c as u64)
    }

    /// All keys a stored neighbor of the pair `(start, end)` could sit under,
    /// the pair's own cells first.
    fn query_keys(&self, start: &TorusPoint, end: &TorusPoint, scratch: &mut Scratch) {
        let d = self.d;
        self.representatives(start, &mut scratch.reps_a);
        self.representatives(end, &mut scratch.reps_b);
        scratch.keys.clear();
        let mut axes = [AxisCells::default(); 8];
        let mut cells = [0i64; 8];
        for a in &scratch.reps_a {
            self.near(a, &mut axes[..d]);
            for b in &scratch.reps_b {
                self.near(b, &mut axes[d..2 * d]);
                if axes[..2 * d].iter().any(|a| a.len == 0) {
                    continue;
                }
                let mut idx = [0usize; 8];
                'outer: loop {
                    for i in 0..2 * d {
                        cells[i] = axes[i].cells[idx[i]];
                    }
                    scratch.keys.push(self.key(&cells[..2 * d]));
                    for i in 0..2 * d {
                        idx[i] += 1;
                        if idx[i] < axes[i].len {
                            continue 'outer;
                        }
                        idx[i] = 0;
                    }
                    break;
                }
            }
        }
    }
}

#[derive(Default)]
struct Scratch {
    reps_a: Vec<[f64; 4]>,
    reps_b: Vec<[f64; 4]>,
    keys: Vec<u64>,
}

fn separated_count(f: &MapSpec, cloud: &[TorusPoint], k: usize, eps: f64, stop_above: usize) -> usize {
    let geometry = f.geometry();
    let cells = Cells::new(&geometry, f.dim(), eps);
    let mut members: Vec<Vec<TorusPoint>> = Vec::new();
    let mut buckets: FxHashMap<u64, Vec<u32>> = FxHashMap::default();
    let mut orbit = Vec::with_capacity(k);
    let mut scratch = Scratch::default();
    let mut home = [0i64; 8];
    let d = f.dim();
    for x in cloud {
        orbit.clear();
        let mut p = *x;
        orbit.push(p);
        for _ in 1..k {
            p = f.forward(&p);
            orbit.push(p);
        }
        let close = |m: &Vec<TorusPoint>| m.iter().zip(&orbit).all(|(a, b)| geometry.dist(a, b) <= eps);
        cells.query_keys(&orbit[0], &orbit[k - 1], &mut scratch);
        let taken = scratch
            .keys
            .iter()
            .any(|key| buckets.get(key).is_some_and(|ids| ids.iter().any(|&id| close(&members[id as usize]))));
        if taken {
            continue;
        }
        cells.home(&orbit[0], &mut home[..d]);
        cells.home(&orbit[k - 1], &mut home[d..2 * d]);
        let key = cells.key(&home[..2 * d]);
        buckets.entry(key).or_default().push(members.len() as u32);
        members.push(orbit.clone());
        if members.len() > stop_above {
            break;
        }
    }
    members.len()
}

fn separated_series(f: &MapSpec, cloud: &[TorusPoint], n: usize, eps: f64) -> BowenSeries {
    let ceiling = cloud.len() / SATURATION;
    let mut counts = Vec::new();
    for k in 1..=n {
        let c = separated_count(f, cloud, k, eps, ceiling);
        counts.push(c);
        if c > ceiling {
            break;
        }
    }
    let usable: Vec<usize> =
        (FIRST_FIT..=counts.len()).filter(|&k| counts[k - 1] >= MIN_COUNT && counts[k - 1] <= ceiling).collect();
    let x: Vec<f64> = usable.iter().map(|&k| k as f64).collect();
    let y: Vec<f64> = usable.iter().map(|&k| (counts[k - 1] as f64).ln()).collect();
    let slope = if usable.len() >= 2 { fit_slope(&x, &y) } else { 0.0 };
    BowenSeries {
        epsilon: eps,
        fit_range: usable.first().map(|&a| (a, *usable.last().unwrap())),
        counts,
        slope,
        flagged: usable.len() < 3,
    }
}
