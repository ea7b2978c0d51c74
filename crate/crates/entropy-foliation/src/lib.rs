//! Entropy and center-foliation diagnostics for the catalog systems.
//!
//! * [`iterate_unstable_disk`] and [`chi_u`] measure the exponential growth
//!   rate of volumes of iterated unstable disks.
//! * [`bowen_entropy`] counts `(n, ε)`-separated sets on a dense sample.
//! * [`thomas_bracket`] turns a reparametrization `τ̃` into entropy bounds.
//! * [`holonomy_map`] and [`almost_parallel_modulus`] slide along center
//!   leaves between transversals and measure how holonomies spread points.
//! * [`volume_comparison_check`] tests `Vol(W′) ≤ C Vol(W)` for a map
//!   `ψ: W → W*` from measured regularity constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod bowen;
mod disk;
mod experiment;
mod holonomy;
mod thomas;
mod volume;

pub use bowen::{bowen_entropy, bowen_entropy_seeded, BowenEstimate, BowenSeries};
pub use disk::{chi_u, iterate_unstable_disk, ChiEstimate, GrowthSeries, SEGMENT_CAP};

pub use experiment::{entropy_local_constancy_experiment, splitting_for, ConstancyReport, SystemEntropy};
pub use holonomy::{
    almost_parallel_modulus, almost_parallel_modulus_seeded, center_field_for, holonomy_map, integrate_leaf,
    CenterField, HolonomySpec, ModulusReport, ModulusRow, Transversal, MAX_LEAF,
};
pub use thomas::{thomas_bracket, ThomasBracket};
pub use volume::{unstable_comparison, volume_comparison_check, Manifold, VolumeComparisonReport};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("center leaf through the point misses the target transversal within leaf distance {0}")]
    NoIntersection(f64),
    #[error(transparent)]
    Splitting(#[from] splitting::SplittingError),
    #[error(transparent)]
    Solver(#[from] quasiconj_solver::SolverError),
}

/// Knobs shared by the entropy experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyParams {
    /// Radius of the seed unstable disk.
    pub r: f64,
    pub n_max: usize,
    /// Seed points for the supremum in `χᵘ`.
    pub chi_points: usize,
    /// Longest orbit segment for the separated-set counts.
    pub bowen_n: usize,
    pub epsilon_list: Vec<f64>,
    /// Candidate points for the separated sets.
    pub bowen_budget: usize,
    pub seed: u64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            r: 0.1,
            n_max: 12,
            chi_points: 4,
            bowen_n: 10,
            epsilon_list: vec![0.25],
            bowen_budget: 1 << 17,
            seed: 42,
        }
    }
}

impl EntropyParams {
    pub fn validate(&self) -> Result<(), EntropyError> {
        if !(self.r > 0.0 && self.r < 0.25) {
            return Err(EntropyError::Params(format!("r = {} not in (0, 1/4)", self.r)));
        }
        if self.n_max < 2 || self.bowen_n < 2 {
            return Err(EntropyError::Params("n_max and bowen_n must be at least 2".into()));
        }
        if self.chi_points == 0 || self.bowen_budget == 0 {
            return Err(EntropyError::Params("sample counts must be positive".into()));
        }
        if self.epsilon_list.is_empty() || self.epsilon_list.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(EntropyError::Params(format!("epsilon_list {:?} must lie in (0, 1/2)", self.epsilon_list)));
        }
        Ok(())
    }
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
