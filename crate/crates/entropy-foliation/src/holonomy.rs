//! Center holonomies between transversals and their modulus of continuity.

use dynamics_catalog::{Geometry, MapSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use splitting::{estimate_frame_at, orthonormalize, Frame, Splitting, Which, DEFAULT_ORBIT_LENGTH};
use torus_geometry::{TorusPoint, Vector};

use crate::{fit_slope, EntropyError};

/// Longest center arc a holonomy may follow.
pub const MAX_LEAF: f64 = 0.5;
/// Integration step along estimated leaves.
const STEP: f64 = 0.02;
const HEIGHT_TOL: f64 = 1e-13;
/// Leaves flatter than this against a transversal are refused.
const MIN_SLOPE: f64 = 0.05;

/// A one-dimensional field of directions along which leaves are followed.
#[derive(Clone, Debug)]
pub enum CenterField {
    Constant(Vector),
    /// Direction from power iteration along the orbit of each point.
    Estimated {
        map: MapSpec,
        orbit_length: usize,
        dims: (usize, usize, usize),
        which: Which,
    },
}

impl CenterField {
    /// Unit direction at `y`, signed to agree with `along`.
    pub fn direction(&self, y: &TorusPoint, along: &Vector) -> Result<Vector, EntropyError> {
        let e = match self {
            CenterField::Constant(e) => *e * (1.0 / e.norm()),
            CenterField::Estimated { map, orbit_length, dims, which } => {
                let frame = estimate_frame_at(map, y, *orbit_length, *dims)?;
                let b = frame.basis(*which);
                if b.ncols() != 1 {
                    return Err(EntropyError::Unsupported(format!(
                        "line field needs a 1-dimensional bundle, got {}",
                        b.ncols()
                    )));
                }
                Vector::from_slice(b.column(0).as_slice())
            }
        };
        Ok(if e.dot(along) < 0.0 { -e } else { e })
    }
}

/// Center field of `f`: constant when the splitting is, estimated otherwise.
pub fn center_field_for(f: &MapSpec, s: &Splitting) -> Result<CenterField, EntropyError> {
    let dims = s.dims();
    if dims.1 != 1 {
        return Err(EntropyError::Unsupported(format!("center dimension {}; holonomies need 1", dims.1)));
    }
    if s.is_constant() && f.constant_differential().is_some() {
        let frame = s.frame_at(&TorusPoint::origin(f.dim()));
        return Ok(CenterField::Constant(Vector::from_slice(frame.basis_c.column(0).as_slice())));
    }
    Ok(CenterField::Estimated { map: f.clone(), orbit_length: DEFAULT_ORBIT_LENGTH, dims, which: Which::C })
}

/// The affine hyperplane through `point` orthogonal to `normal`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transversal {
    pub point: TorusPoint,
    pub normal: Vector,
}

impl Transversal {
    pub fn new(point: TorusPoint, normal: Vector) -> Result<Self, EntropyError> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) || normal.dim() != point.dim() {
            return Err(EntropyError::Params(
                "transversal normal must be a nonzero vector of the torus dimension".into(),
            ));
        }
        Ok(Transversal { point, normal: normal * (1.0 / n) })
    }

    /// Plane through `point` spanned by `E^s ⊕ E^u` of `frame`.
    pub fn us_plane(point: TorusPoint, frame: &Frame) -> Result<Self, EntropyError> {
        if frame.basis_c.ncols() != 1 {
            return Err(EntropyError::Unsupported("us-planes need a 1-dimensional center".into()));
        }
        let d = point.dim();
        let (ns, nu) = (frame.basis_s.ncols(), frame.basis_u.ncols());
        let mut m = DMatrix::zeros(d, ns + nu);
        m.columns_mut(0, ns).copy_from(&frame.basis_s);
        m.columns_mut(ns, nu).copy_from(&frame.basis_u);
        let q = orthonormalize(&m);
        let mut best = Vector::zeros(d);
        for k in 0..d {
            let mut w = Vector::axis(d, k);
            for j in 0..q.ncols() {
                let col = Vector::from_slice(q.column(j).as_slice());
                w -= col * col.dot(&Vector::axis(d, k));
            }
            if w.norm() > best.norm() {
                best = w;
            }
        }
        let c = Vector::from_slice(frame.basis_c.column(0).as_slice());
        if best.dot(&c) < 0.0 {
            best = -best;
        }
        Transversal::new(point, best)
    }

    /// Signed distance of `y` from the plane, measured from the nearest lift.
    pub fn height(&self, y: &TorusPoint) -> f64 {
        self.point.displacement_to(y).dot(&self.normal)
    }

    /// Unit vector in the plane, the in-plane part of `w`.
    pub fn in_plane(&self, w: &Vector) -> Option<Vector> {
        let p = *w - self.normal * w.dot(&self.normal);
        let n = p.norm();
        (n > 1e-12).then(|| p * (1.0 / n))
    }
}

#[derive(Clone, Debug)]
pub struct HolonomySpec {
    pub source: Transversal,
    pub target: Transversal,
    pub leaf: CenterField,
}

/// One classical Runge–Kutta step of length `h` along the field.
pub(crate) fn rk4(
    field: &CenterField,
    y: &TorusPoint,
    along: &Vector,
    h: f64,
) -> Result<(TorusPoint, Vector), EntropyError> {
    let k1 = field.direction(y, along)?;
    let k2 = field.direction(&y.translate(&(k1 * (h / 2.0))), &k1)?;
    let k3 = field.direction(&y.translate(&(k2 * (h / 2.0))), &k1)?;
    let k4 = field.direction(&y.translate(&(k3 * h)), &k1)?;
    let step = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    Ok((y.translate(&step), k1))
}

/// Points along the leaf through `x`, `steps` equal steps for a signed arc
/// `length` (the sign picks the end the field points away from).
pub fn integrate_leaf(
    field: &CenterField,
    x: &TorusPoint,
    length: f64,
    steps: usize,
) -> Result<Vec<TorusPoint>, EntropyError> {
    if steps == 0 || !length.is_finite() {
        return Err(EntropyError::Params("leaf integration needs a finite length and at least one step".into()));
    }
    let d = x.dim();
    let mut along = field.direction(x, &Vector::axis(d, d - 1))?;
    if length < 0.0 {
        along = -along;
    }
    let h = length.abs() / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = *x;
    out.push(y);
    for _ in 0..steps {
        let (next, k1) = rk4(field, &y, &along, h)?;
        along = k1;
        y = next;
        out.push(y);
    }
    Ok(out)
}

/// Slide `x` along its center leaf to the target transversal.
pub fn holonomy_map(spec: &HolonomySpec, x: &TorusPoint) -> Result<TorusPoint, EntropyError> {
    if spec.source.height(x).abs() > 1e-9 {
        return Err(EntropyError::Params("point is not on the source transversal".into()));
    }
    slide(&spec.leaf, &spec.target, x)
}

pub(crate) fn slide(field: &CenterField, target: &Transversal, x: &TorusPoint) -> Result<TorusPoint, EntropyError> {
    let n = target.normal;
    let mut y = *x;
    let mut h = target.height(&y);
    let mut travelled = 0.0;
    for _ in 0..200 {
        if h.abs() < HEIGHT_TOL {
            return Ok(y);
        }
        let down = n * (-h.signum());
        let e = field.direction(&y, &down)?;
        let slope = e.dot(&down);
        if slope < MIN_SLOPE {
            return Err(EntropyError::NoIntersection(travelled));
        }
        let newton = h.abs() / slope;
        if let CenterField::Constant(_) = field {
            if travelled + newton > MAX_LEAF {
                return Err(EntropyError::NoIntersection(travelled + newton));
            }
            return Ok(y.translate(&(e * newton)));
        }
        let step = newton.min(STEP);
        if travelled + step > MAX_LEAF {
            return Err(EntropyError::NoIntersection(travelled + step));
        }
        y = rk4(field, &y, &e, step)?.0;
        travelled += step;
        h = target.height(&y);
    }
    Err(EntropyError::NoIntersection(travelled))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub beta: f64,
    /// Largest holonomy image distance over the sampled pairs.
    pub alpha: f64,
    pub ratio: f64,
    pub pairs: usize,
    /// Pairs whose leaves missed the target.
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub rows: Vec<ModulusRow>,
    /// Log-log slope of `α` against `β`.
    pub exponent: f64,
    pub max_ratio: f64,
    /// `α` grows with `β` and tends to zero with it.
    pub equicontinuous: bool,
}

/// [`almost_parallel_modulus_seeded`] with seed 42.
pub fn almost_parallel_modulus(
    f: &MapSpec,
    s: &Splitting,
    beta_list: &[f64],
    sample_budget: usize,
) -> Result<ModulusReport, EntropyError> {
    almost_parallel_modulus_seeded(f, s, beta_list, sample_budget, 42)
}

/// For each `β`, the largest distance between holonomy images of two
/// points at distance at most `β` on a random us-plane, slid to a random
/// us-plane further along the center leaves.
pub fn almost_parallel_modulus_seeded(
    f: &MapSpec,
    s: &Splitting,
    beta_list: &[f64],
    sample_budget: usize,
    seed: u64,
) -> Result<ModulusReport, EntropyError> {
    if beta_list.is_empty() || beta_list.iter().any(|&b| !(b > 0.0 && b <= 0.25)) {
        return Err(EntropyError::Params(format!("beta_list {beta_list:?} must lie in (0, 1/4]")));
    }
    if f.geometry() != Geometry::Flat {
        return Err(EntropyError::Unsupported("holonomies are followed on flat tori only".into()));
    }
    let field = center_field_for(f, s)?;
    let pairs = (sample_budget / beta_list.len()).max(1);
    let d = f.dim();
    let mut betas = beta_list.to_vec();
    betas.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in &betas {
        let mut alpha: f64 = 0.0;
        let mut failures = 0;
        for i in 0..pairs {
            let p1 = TorusPoint::wrapped(Vector::from_slice(&(0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>()));
            let offset = rng.random_range(0.05..0.4) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let p2 = *integrate_leaf(&field, &p1, offset, 20)?.last().expect("leaf has points");
            let source = Transversal::us_plane(p1, &s.frame_at(&p1))?;
            let target = Transversal::us_plane(p2, &s.frame_at(&p2))?;
            let random_dir = |rng: &mut ChaCha8Rng| loop {
                let w = Vector::from_slice(&(0..d).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>());
                if let Some(u) = source.in_plane(&w) {
                    return u;
                }
            };
            let x = p1.translate(&(random_dir(&mut rng) * rng.random_range(0.0..0.05)));
            let t = if i % 2 == 0 { 1.0 } else { rng.random_range(f64::EPSILON..1.0) };
            let y = x.translate(&(random_dir(&mut rng) * (beta * t)));
            let spec = HolonomySpec { source, target, leaf: field.clone() };
            match (slide(&spec.leaf, &spec.target, &x), slide(&spec.leaf, &spec.target, &y)) {
                (Ok(a), Ok(b)) => alpha = alpha.max(a.displacement_to(&b).norm()),
                _ => failures += 1,
            }
        }
        rows.push(ModulusRow { beta, alpha, ratio: alpha / beta, pairs, failures });
    }
    let good: Vec<&ModulusRow> = rows.iter().filter(|r| r.failures < r.pairs && r.alpha > 0.0).collect();
    let x: Vec<f64> = good.iter().map(|r| r.beta.ln()).collect();
    let y: Vec<f64> = good.iter().map(|r| r.alpha.ln()).collect();
    let exponent = if good.len() >= 2 { fit_slope(&x, &y) } else { 0.0 };
    let increasing = rows.windows(2).all(|w| w[1].alpha >= w[0].alpha);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let equicontinuous = good.len() == rows.len() && increasing && (rows.len() < 2 || exponent > 0.0);
    Ok(ModulusReport { rows, exponent, max_ratio, equicontinuous })
}
