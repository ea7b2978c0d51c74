use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use torus_geometry::{TorusPoint, Vector};

use dynamics_catalog::{mat_vec, MapSpec};

use crate::{random_point, Representation, Splitting, Which};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    /// Smallest relative margin `(bound − growth) / bound` over all checks.
    pub worst_margin: f64,
    /// Checks with margin below `−tolerance`.
    pub violations: usize,
    pub checks: usize,
    pub tolerance: f64,
}

impl HyperbolicityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check the growth inequalities with `C = 1` for `1 ≤ n ≤ n_max` on unit
/// basis vectors of each subbundle. Per-grid splittings are sampled at nodes.
pub fn verify_hyperbolicity(
    f: &MapSpec,
    s: &Splitting,
    n_max: usize,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> HyperbolicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<TorusPoint> = match s.representation() {
        Representation::Constant(_) => (0..samples).map(|_| random_point(&mut rng, f.dim())).collect(),
        Representation::PerGridPoint { grid, .. } => {
            let stride = (grid.len() / samples.max(1)).max(1);
            (0..grid.len()).step_by(stride).take(samples).map(|i| grid.node(i)).collect()
        }
    };
    let c = *s.constants();
    let mut report = HyperbolicityReport { worst_margin: f64::INFINITY, violations: 0, checks: 0, tolerance };
    let mut record = |margin: f64| {
        report.worst_margin = report.worst_margin.min(margin);
        report.checks += 1;
        if margin < -tolerance {
            report.violations += 1;
        }
    };
    for x in &points {
        let frame = s.frame_at(x);
        for which in Which::ALL {
            let basis = frame.basis(which);
            for j in 0..basis.ncols() {
                let v0 = Vector::from_slice(basis.column(j).as_slice());
                let forward = which != Which::U;
                let mut v = v0;
                let mut p = *x;
                for n in 1..=n_max {
                    if forward {
                        v = mat_vec(&f.differential(&p), &v);
                        p = f.forward(&p);
                    } else {
                        p = f.inverse(&p);
                        v = mat_vec(&f.differential(&p).try_inverse().expect("invertible"), &v);
                    }
                    let g = v.norm();
                    let n = n as i32;
                    match which {
                        Which::S => record((c.lambda.powi(n) - g) / c.lambda.powi(n)),
                        Which::U => {
                            let b = c.mu.powi(-n);
                            record((b - g) / b)
                        }
                        Which::C => {
                            let lo = c.lambda_c.powi(n);
                            let hi = c.mu_c.powi(n);
                            record(((g - lo) / lo).min((hi - g) / hi))
                        }
                    }
                }
            }
        }
    }
    report
}
