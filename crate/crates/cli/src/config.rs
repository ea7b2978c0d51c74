//! Experiment configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use dynamics_catalog::{
    make_flow_time, make_linear_ph, make_perturbed, make_skew_product, suspension_flow, CatalogError, FiberShift,
    FlowSpec, IntMatrix, MapSpec, Roof, VectorField,
};
use entropy_foliation::EntropyParams;
use quasiconj_solver::SolverParams;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "solve-A")]
    SolveA,
    #[serde(rename = "solve-Bprime")]
    SolveBprime,
    #[serde(rename = "solve-B")]
    SolveB,
    #[serde(rename = "contract-check")]
    ContractCheck,
    #[serde(rename = "entropy-scan")]
    EntropyScan,
    #[serde(rename = "holonomy-modulus")]
    HolonomyModulus,
    #[serde(rename = "thomas-bracket")]
    ThomasBracket,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SolveA => "solve-A",
            Experiment::SolveBprime => "solve-Bprime",
            Experiment::SolveB => "solve-B",
            Experiment::ContractCheck => "contract-check",
            Experiment::EntropyScan => "entropy-scan",
            Experiment::HolonomyModulus => "holonomy-modulus",
            Experiment::ThomasBracket => "thomas-bracket",
        }
    }
}

/// Named smooth fields for `perturbed` systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    Zero,
    CatShear,
    SkewMix,
    SkewTilt,
}

impl FieldName {
    pub fn build(self, dim: usize) -> VectorField {
        match self {
            FieldName::Zero => VectorField::zero(dim),
            FieldName::CatShear => VectorField::cat_shear(),
            FieldName::SkewMix => VectorField::skew_mix(),
            FieldName::SkewTilt => VectorField::skew_tilt(),
        }
    }
}

fn unit_roof() -> Roof {
    Roof::Constant { value: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemDescriptor {
    /// `x ↦ M x`, optionally followed by an identity block.
    Linear {
        matrix: Vec<Vec<i64>>,
        #[serde(default)]
        identity_block: usize,
    },
    /// `(x, z) ↦ (A x, z + shift(x))` over a 2×2 base.
    SkewProduct { matrix: Vec<Vec<i64>>, shift: FiberShift },
    /// `f ∘ (id + amplitude · field)` for another descriptor `f`.
    Perturbed { base: Box<SystemDescriptor>, field: FieldName, amplitude: f64 },
    /// Time-one map of the suspension flow under `roof`.
    SuspensionTime1 {
        matrix: Vec<Vec<i64>>,
        #[serde(default = "unit_roof")]
        roof: Roof,
    },
}

impl SystemDescriptor {
    pub fn build(&self) -> Result<MapSpec, CatalogError> {
        match self {
            SystemDescriptor::Linear { matrix, identity_block } => {
                make_linear_ph(IntMatrix::from_rows(matrix)?.direct_sum_identity(*identity_block))
            }
            SystemDescriptor::SkewProduct { matrix, shift } => {
                make_skew_product(IntMatrix::from_rows(matrix)?, shift.clone())
            }
            SystemDescriptor::Perturbed { base, field, amplitude } => {
                let f = base.build()?;
                let dim = f.dim();
                make_perturbed(f, field.build(dim), *amplitude)
            }
            SystemDescriptor::SuspensionTime1 { .. } => Ok(make_flow_time(self.flow()?.expect("suspension"), 1.0)),
        }
    }

    /// Flow whose orbits are the center leaves, where the catalog knows one.
    pub fn flow(&self) -> Result<Option<FlowSpec>, CatalogError> {
        Ok(match self {
            SystemDescriptor::Linear { matrix, identity_block: 1 } if matrix.len() == 2 => Some(FlowSpec::vertical(3)),
            SystemDescriptor::SkewProduct { .. } => Some(FlowSpec::vertical(3)),
            SystemDescriptor::SuspensionTime1 { matrix, roof } => {
                Some(suspension_flow(IntMatrix::from_rows(matrix)?, roof.clone())?)
            }
            _ => None,
        })
    }

    /// Base matrix of a system that is a product or skew product over `T²`.
    fn skew_base(&self) -> Option<&Vec<Vec<i64>>> {
        match self {
            SystemDescriptor::Linear { matrix, identity_block: 1 } if matrix.len() == 2 => Some(matrix),
            SystemDescriptor::SkewProduct { matrix, .. } => Some(matrix),
            _ => None,
        }
    }
}

/// How `g` is obtained from the configured system `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    Identical,
    /// `f ∘ (id + amplitude · field)`.
    Field {
        field: FieldName,
        amplitude: f64,
    },
    /// The skew product over the base of `f` with this fiber shift.
    FiberShift {
        shift: FiberShift,
    },
    /// Time-`time` map of the suspension flow of `f`.
    FlowTime {
        time: f64,
    },
    /// An unrelated catalog entry.
    System {
        system: SystemDescriptor,
    },
}

impl Perturbation {
    pub fn build(&self, system: &SystemDescriptor, f: &MapSpec) -> Result<MapSpec, String> {
        match self {
            Perturbation::Identical => Ok(f.clone()),
            Perturbation::Field { field, amplitude } => {
                make_perturbed(f.clone(), field.build(f.dim()), *amplitude).map_err(|e| e.to_string())
            }
            Perturbation::FiberShift { shift } => {
                let base = system.skew_base().ok_or("fiber_shift needs a product or skew product system over T²")?;
                let base = IntMatrix::from_rows(base).map_err(|e| e.to_string())?;
                make_skew_product(base, shift.clone()).map_err(|e| e.to_string())
            }
            Perturbation::FlowTime { time } => {
                if !matches!(system, SystemDescriptor::SuspensionTime1 { .. }) {
                    return Err("flow_time needs a suspension_time1 system".into());
                }
                if !(*time > 0.0 && time.is_finite()) {
                    return Err(format!("time {time} must be positive"));
                }
                let flow = system.flow().map_err(|e| e.to_string())?.expect("suspension");
                Ok(make_flow_time(flow, *time))
            }
            Perturbation::System { system } => system.build().map_err(|e| e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolonomyParams {
    pub beta_list: Vec<f64>,
    pub sample_budget: usize,
}

impl Default for HolonomyParams {
    fn default() -> Self {
        HolonomyParams { beta_list: vec![0.1, 0.05, 0.01], sample_budget: 150 }
    }
}

/// Pass thresholds applied to the measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// `|χᵘ(g) − χᵘ(f)|` and the radius spread.
    pub chi_tol: f64,
    /// `|h_sep − χᵘ|` for each system.
    pub bowen_tol: f64,
    /// Allowed `α(β)/β`.
    pub modulus_ratio: f64,
    /// Slack around the entropy bracket, relative to `h(f)`.
    pub thomas_tol: f64,
    pub contraction_pairs: usize,
    pub p_inverse_samples: usize,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            chi_tol: 0.005,
            bowen_tol: 0.05,
            modulus_ratio: 2.0,
            thomas_tol: 0.03,
            contraction_pairs: 200,
            p_inverse_samples: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Relative paths are taken from the directory of the config file.
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { directory: PathBuf::from("out"), formats: vec![Format::Json, Format::Csv] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used by `run`; the other subcommands name the experiment themselves.
    pub experiment: Option<Experiment>,
    /// Seeds every random choice; overrides the seeds inside the sections.
    pub seed: Option<u64>,
    pub system: SystemDescriptor,
    pub perturbation: Option<Perturbation>,
    /// Named perturbations for `entropy-scan`.
    #[serde(default)]
    pub perturbations: BTreeMap<String, Perturbation>,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub entropy: EntropyParams,
    #[serde(default)]
    pub holonomy: HolonomyParams,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A configuration problem, located in the file where possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// A loaded configuration together with its source text, for error locations.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub path: PathBuf,
    pub text: String,
    pub config: ExperimentConfig,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Loaded, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Loaded::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Loaded, ConfigError> {
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(&text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        let loaded = Loaded { path: path.to_path_buf(), text, config };
        loaded.validate()?;
        Ok(loaded)
    }

    /// Error anchored at `key` in `[section]`, at the section header when the
    /// key is absent, or at a key of the section named in `message`.
    pub fn error(&self, section: &str, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        let message = message.into();
        let keys = section_keys(&self.text, section);
        let line = key
            .and_then(|k| keys.iter().find(|(name, _)| name == k).map(|&(_, l)| l))
            .or_else(|| keys.iter().find(|(name, _)| mentions(&message, name)).map(|&(_, l)| l))
            .or_else(|| header_line(&self.text, section));
        ConfigError { path: self.path.clone(), line, message }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        c.system.build().map_err(|e| self.error("system", None, e.to_string()))?;
        let mut solver = c.solver.clone();
        solver.seed = self.seed();
        solver.validate().map_err(|e| self.error("solver", None, e.to_string()))?;
        c.entropy.validate().map_err(|e| self.error("entropy", None, e.to_string()))?;
        let h = &c.holonomy;
        if h.beta_list.is_empty() || h.beta_list.iter().any(|&b| !(b > 0.0 && b <= 0.25)) {
            return Err(self.error("holonomy", Some("beta_list"), "beta_list entries must lie in (0, 1/4]"));
        }
        if h.sample_budget == 0 {
            return Err(self.error("holonomy", Some("sample_budget"), "sample_budget must be positive"));
        }
        let k = &c.checks;
        for (key, value) in [
            ("chi_tol", k.chi_tol),
            ("bowen_tol", k.bowen_tol),
            ("modulus_ratio", k.modulus_ratio),
            ("thomas_tol", k.thomas_tol),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(self.error("checks", Some(key), format!("{key} must be positive")));
            }
        }
        if k.contraction_pairs == 0 || k.p_inverse_samples == 0 {
            return Err(self.error("checks", None, "sample counts must be positive"));
        }
        if c.outputs.formats.is_empty() {
            return Err(self.error("outputs", Some("formats"), "at least one output format is needed"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn output_dir(&self) -> PathBuf {
        let dir = &self.config.outputs.directory;
        if dir.is_absolute() {
            dir.clone()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(dir)
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams { seed: self.seed(), ..self.config.solver.clone() }
    }

    pub fn entropy_params(&self) -> EntropyParams {
        EntropyParams { seed: self.seed(), ..self.config.entropy.clone() }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn table_name(line: &str) -> Option<&str> {
    let t = line.trim();
    let inner =
        t.strip_prefix("[[").and_then(|r| r.strip_suffix("]]")).or_else(|| t.strip_prefix('[')?.strip_suffix(']'))?;
    Some(inner.trim())
}

fn header_line(text: &str, section: &str) -> Option<usize> {
    text.lines().position(|l| table_name(l) == Some(section)).map(|i| i + 1)
}

/// Keys assigned directly in `[section]`, with their lines.
fn section_keys(text: &str, section: &str) -> Vec<(String, usize)> {
    let mut current = String::new();
    let mut keys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(name) = table_name(line) {
            current = name.to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            if !key.is_empty() && !key.starts_with('#') {
                keys.push((key.to_string(), i + 1));
            }
        }
    }
    keys
}

/// `name` occurs in `message` as a whole identifier.
fn mentions(message: &str, name: &str) -> bool {
    let is_ident = |c: char| c.is_alphanumeric() || c == '_';
    message.match_indices(name).any(|(i, _)| {
        let before = message[..i].chars().next_back();
        let after = message[i + name.len()..].chars().next();
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAT_SKEW: &str = r#"
experiment = "solve-A"

[system]
kind = "linear"
matrix = [[2, 1], [1, 1]]
identity_block = 1

[perturbation]
kind = "fiber_shift"
shift = { formula = "constant", value = 0.02 }

[solver]
resolution = [16, 16, 16]
"#;

    fn parse(text: &str) -> Result<Loaded, ConfigError> {
        Loaded::parse(Path::new("test.toml"), text.to_string())
    }

    #[test]
    fn parses_a_skew_rotation() {
        let l = parse(CAT_SKEW).unwrap();
        assert_eq!(l.config.experiment, Some(Experiment::SolveA));
        let f = l.config.system.build().unwrap();
        let g = l.config.perturbation.as_ref().unwrap().build(&l.config.system, &f).unwrap();
        assert_eq!(g.dim(), 3);
        assert_eq!(l.seed(), 42);
        assert_eq!(l.config.system.flow().unwrap(), Some(FlowSpec::vertical(3)));
    }

    #[test]
    fn validation_errors_point_at_the_key() {
        let text = CAT_SKEW.replace("resolution = [16, 16, 16]", "resolution = [16, 16, 16]\nepsilon = -1.0");
        let e = parse(&text).unwrap_err();
        assert_eq!(e.line, Some(15), "{e}");
        assert!(e.to_string().starts_with("test.toml:15: "));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let text = CAT_SKEW.replace("identity_block = 1", "identity_block = 1\ncolour = 3");
        let e = parse(&text).unwrap_err();
        assert!(e.message.contains("colour"), "{e}");
        assert_eq!(e.line, Some(4));
        let e = parse(&CAT_SKEW.replace("[solver]", "[solver]\nradius = 1")).unwrap_err();
        assert_eq!(e.line, Some(14), "{e}");
    }

    #[test]
    fn identifier_matching_is_whole_word() {
        assert!(mentions("epsilon 2 not in (0, 1/2)", "epsilon"));
        assert!(!mentions("epsilon_list [] must lie", "epsilon"));
        assert!(mentions("epsilon_list [] must lie", "epsilon_list"));
    }
}
