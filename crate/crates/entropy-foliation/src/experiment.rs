//! Unstable volume growth and separated-set entropy for a reference map
//! and a family of perturbations.

use dynamics_catalog::MapSpec;
use serde::{Deserialize, Serialize};
use splitting::{estimate_splitting, exact_splitting, Splitting, DEFAULT_ORBIT_LENGTH};
use torus_geometry::Grid;

use crate::disk::random_points;
use crate::{bowen_entropy_seeded, chi_u, BowenEstimate, ChiEstimate, EntropyError, EntropyParams};

/// Grid nodes per axis for splittings estimated on 2- and 3-tori.
const SPLITTING_GRID: [usize; 2] = [64, 16];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemEntropy {
    pub id: String,
    pub chi: ChiEstimate,
    pub bowen: BowenEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub reference: SystemEntropy,
    pub perturbed: Vec<SystemEntropy>,
    /// Largest `|χᵘ(g) − χᵘ(f)|`.
    pub max_chi_deviation: f64,
    /// Largest `|h(g) − h(f)|` from the separated sets.
    pub max_bowen_deviation: f64,
}

/// Exact splitting for maps with a constant differential, a grid estimate
/// otherwise.
pub fn splitting_for(f: &MapSpec) -> Result<Splitting, EntropyError> {
    if f.constant_differential().is_some() {
        return Ok(exact_splitting(f, (0.5, 1.5))?);
    }
    let d = f.dim();
    let per_axis = if d <= 2 { SPLITTING_GRID[0] } else { SPLITTING_GRID[1] };
    let grid = Grid::uniform(d, per_axis).map_err(|e| EntropyError::Params(e.to_string()))?;
    Ok(estimate_splitting(f, DEFAULT_ORBIT_LENGTH, &grid)?)
}

fn measure(id: &str, f: &MapSpec, p: &EntropyParams) -> Result<SystemEntropy, EntropyError> {
    let s = splitting_for(f)?;
    let points = random_points(f.dim(), p.chi_points, p.seed);
    let chi = chi_u(f, &s, &points, p.r, p.n_max)?;
    let bowen = bowen_entropy_seeded(f, p.bowen_n, &p.epsilon_list, p.bowen_budget, p.seed)?;
    Ok(SystemEntropy { id: id.to_string(), chi, bowen })
}

/// `χᵘ` and the separated-set entropy of `f` and of each perturbation.
pub fn entropy_local_constancy_experiment(
    f: &MapSpec,
    perturbations: &[(String, MapSpec)],
    params: &EntropyParams,
) -> Result<ConstancyReport, EntropyError> {
    params.validate()?;
    if perturbations.iter().any(|(_, g)| g.dim() != f.dim()) {
        return Err(EntropyError::Params("perturbations must act on the same torus".into()));
    }
    let reference = measure("reference", f, params)?;
    let perturbed = perturbations.iter().map(|(id, g)| measure(id, g, params)).collect::<Result<Vec<_>, _>>()?;
    let max_dev =
        |key: fn(&SystemEntropy) -> f64| perturbed.iter().map(|s| (key(s) - key(&reference)).abs()).fold(0.0, f64::max);
    let max_chi_deviation = max_dev(|s| s.chi.value);
    let max_bowen_deviation = max_dev(|s| s.bowen.estimate);
    Ok(ConstancyReport { reference, perturbed, max_chi_deviation, max_bowen_deviation })
}
