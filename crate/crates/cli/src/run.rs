//! Experiments behind the subcommands.

use std::path::Path;

use dynamics_catalog::MapSpec;
use entropy_foliation::{
    almost_parallel_modulus_seeded, bowen_entropy_seeded, entropy_local_constancy_experiment, splitting_for,
    thomas_bracket, EntropyError, SystemEntropy,
};
use quasiconj_solver::{
    empirical_contraction, random_section, solve_theorem_A, solve_theorem_B_transversal, solve_theorem_Bprime,
    Composite, Operators, SolutionReport, SolverError, SolverParams,
};
use serde::Serialize;
use splitting::{estimate_splitting_seeded, exact_splitting_seeded, Splitting};

use crate::config::{ConfigError, Experiment, Format, Loaded, Perturbation, SystemDescriptor};

#[derive(Debug)]
pub enum RunError {
    /// Exit status 2.
    Config(ConfigError),
    /// A solver or estimator refused; exit status 1.
    Failed(String),
    /// Results could not be written; exit status 2.
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Failed(m) => write!(f, "failed: {m}"),
            RunError::Io(m) => write!(f, "cannot write results: {m}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// One line of the CSV summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub system: String,
    pub quantity: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    /// `None` for informational rows.
    pub pass: Option<bool>,
}

impl Row {
    fn check(system: &str, quantity: &str, value: f64, tolerance: Option<f64>, pass: bool) -> Row {
        Row { system: system.into(), quantity: quantity.into(), value, tolerance, pass: Some(pass) }
    }

    fn info(system: &str, quantity: &str, value: f64) -> Row {
        Row { system: system.into(), quantity: quantity.into(), value, tolerance: None, pass: None }
    }
}

pub struct Outcome {
    pub experiment: Experiment,
    pub rows: Vec<Row>,
    pub report: serde_json::Value,
    /// Extra files as `(name, bytes)`, written next to the report.
    pub attachments: Vec<(String, Vec<u8>)>,
    /// An experiment-specific table, written when CSV output is on.
    pub table: Option<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }
}

fn solver_error(l: &Loaded, e: SolverError) -> RunError {
    match e {
        SolverError::Params(_) => l.error("solver", None, e.to_string()).into(),
        SolverError::Unsupported(_) => l.error("system", None, e.to_string()).into(),
        e => RunError::Failed(e.to_string()),
    }
}

fn entropy_error(l: &Loaded, section: &str, e: EntropyError) -> RunError {
    match e {
        EntropyError::Params(_) => l.error(section, None, e.to_string()).into(),
        EntropyError::Unsupported(_) => l.error("system", None, e.to_string()).into(),
        EntropyError::Solver(e) => solver_error(l, e),
        e => RunError::Failed(e.to_string()),
    }
}

fn build_g(l: &Loaded, p: &Perturbation, f: &MapSpec, section: &str) -> Result<MapSpec, RunError> {
    p.build(&l.config.system, f).map_err(|m| l.error(section, None, m).into())
}

fn systems(l: &Loaded, experiment: Experiment) -> Result<(MapSpec, MapSpec), RunError> {
    let f = l.config.system.build().map_err(|e| l.error("system", None, e.to_string()))?;
    let p = l.config.perturbation.as_ref().ok_or_else(|| ConfigError {
        path: l.path.clone(),
        line: None,
        message: format!("{} needs a [perturbation] section", experiment.name()),
    })?;
    let g = build_g(l, p, &f, "perturbation")?;
    Ok((f, g))
}

fn center_flow(l: &Loaded) -> Result<dynamics_catalog::FlowSpec, RunError> {
    l.config
        .system
        .flow()
        .map_err(|e| l.error("system", None, e.to_string()))?
        .ok_or_else(|| l.error("system", Some("kind"), "no center flow is known for this system").into())
}

/// The splitting the solver itself would use for `f`.
fn solver_splitting(l: &Loaded, f: &MapSpec, p: &SolverParams) -> Result<Splitting, RunError> {
    let s = if f.constant_differential().is_some() {
        exact_splitting_seeded(f, (1.0, 1.0), p.seed)
    } else {
        let grid = p.grid(f.dim()).map_err(|e| solver_error(l, e))?;
        estimate_splitting_seeded(f, p.orbit_length, &grid, p.seed)
    };
    s.map_err(|e| RunError::Failed(e.to_string()))
}

pub fn run(l: &Loaded, experiment: Experiment) -> Result<Outcome, RunError> {
    match experiment {
        Experiment::SolveA | Experiment::SolveBprime | Experiment::SolveB => solve(l, experiment),
        Experiment::ContractCheck => contract_check(l),
        Experiment::EntropyScan => entropy_scan(l),
        Experiment::HolonomyModulus => holonomy_modulus(l),
        Experiment::ThomasBracket => thomas(l),
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    experiment: &'static str,
    system: &'a SystemDescriptor,
    perturbation: &'a Perturbation,
    /// Componentwise mean, minimum and maximum of `u` over the grid.
    u_mean: Vec<f64>,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    report: SolutionReport,
}

fn section_bytes(s: &section_space::Section) -> Result<Vec<u8>, RunError> {
    let mut bytes = Vec::new();
    section_space::write_binary(s, &mut bytes).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(bytes)
}

fn solve(l: &Loaded, experiment: Experiment) -> Result<Outcome, RunError> {
    let (f, g) = systems(l, experiment)?;
    let p = l.solver_params();
    let q = match experiment {
        Experiment::SolveA => solve_theorem_A(&f, &g, &p),
        Experiment::SolveBprime => solve_theorem_Bprime(&f, &g, &center_flow(l)?, &p),
        _ => solve_theorem_B_transversal(&f, &g, &p),
    }
    .map_err(|e| solver_error(l, e))?;

    let d = f.dim();
    let values = q.u.values();
    let component = |i: usize| values.iter().map(move |u| u[i]);
    let n = values.len() as f64;
    let u_mean = (0..d).map(|i| component(i).sum::<f64>() / n).collect();
    let u_min = (0..d).map(|i| component(i).fold(f64::INFINITY, f64::min)).collect();
    let u_max = (0..d).map(|i| component(i).fold(f64::NEG_INFINITY, f64::max)).collect();
    let report = q.report();
    let v = &report.verification;
    let mut rows = vec![
        Row::check("g", "residual_sup", q.residual().0, Some(v.residual_tol), v.residual_ok),
        Row::check("g", "displacement", v.displacement, Some(p.epsilon), v.displacement_ok),
        Row::check("g", "center_leak", v.center_leak, None, v.center_ok),
        Row::check("g", "norm1", v.norm1, Some(p.epsilon), v.ball_ok),
        Row::check("g", "surjectivity", f64::from(u8::from(v.surjectivity_ok)), None, v.surjectivity_ok),
        Row::info("g", "iterations", report.iterations as f64),
        Row::info("g", "u_sup", report.u_sup),
        Row::info("g", "v_sup", report.v_sup),
    ];
    if let Some([lo, mean, hi]) = report.tau_tilde_min_mean_max {
        rows.extend([Row::info("g", "tau_min", lo), Row::info("g", "tau_mean", mean), Row::info("g", "tau_max", hi)]);
    }
    rows.push(Row::check("g", "verification", f64::from(u8::from(v.passed)), None, v.passed));

    let output = SolveOutput {
        experiment: experiment.name(),
        system: &l.config.system,
        perturbation: l.config.perturbation.as_ref().expect("checked in systems"),
        u_mean,
        u_min,
        u_max,
        report,
    };
    let report = serde_json::to_value(&output).map_err(|e| RunError::Io(e.to_string()))?;
    let attachments = vec![("u.bin".to_string(), section_bytes(&q.u)?), ("v.bin".to_string(), section_bytes(&q.v)?)];
    Ok(Outcome { experiment, rows, report, attachments, table: None })
}

#[derive(Serialize)]
struct ContractOutput {
    contraction: quasiconj_solver::ContractionReport,
    p_inverse_norm1: f64,
    p_inverse_bound: f64,
    lambda: f64,
}

fn contract_check(l: &Loaded) -> Result<Outcome, RunError> {
    let (f, g) = systems(l, Experiment::ContractCheck)?;
    let p = l.solver_params();
    let s = solver_splitting(l, &f, &p)?;
    let h = Composite::new(&g, &f);
    let checks = &l.config.checks;
    let c = empirical_contraction(&f, &h, &s, &p, checks.contraction_pairs).map_err(|e| solver_error(l, e))?;

    let grid = p.grid(f.dim()).map_err(|e| solver_error(l, e))?;
    let ops = Operators::new(&f, &h, &s, &grid, p.neumann_depth, p.neumann_tol).map_err(|e| solver_error(l, e))?;
    let mut worst: f64 = 0.0;
    for k in 0..checks.p_inverse_samples as u64 {
        let w = random_section(&grid, p.seed.wrapping_add(k));
        let w = w.scale(1.0 / ops.norm1(&w));
        worst = worst.max(ops.norm1(&ops.P_inverse(&w).map_err(|e| solver_error(l, e))?));
    }
    let lambda = s.constants().lambda;
    let bound = 2.0 / (1.0 - lambda);
    let rows = vec![
        Row::check("g", "lipschitz_ratio", c.max_ratio, Some(0.5), c.contracts()),
        Row::check("g", "image_norm1", c.max_image_norm1, Some(0.75 * c.epsilon), c.maps_into_ball()),
        Row::check("g", "p_inverse_norm1", worst, Some(bound), worst <= bound),
    ];
    let out = ContractOutput { contraction: c, p_inverse_norm1: worst, p_inverse_bound: bound, lambda };
    let report = serde_json::to_value(&out).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Outcome { experiment: Experiment::ContractCheck, rows, report, attachments: vec![], table: None })
}

#[derive(Serialize)]
struct EntropyLine<'a> {
    system: &'a str,
    chi_u: f64,
    chi_u_half_radius: f64,
    chi_u_spread: f64,
    bowen: f64,
    bowen_flagged: bool,
}

fn entropy_scan(l: &Loaded) -> Result<Outcome, RunError> {
    let f = l.config.system.build().map_err(|e| l.error("system", None, e.to_string()))?;
    let mut named = Vec::new();
    for (id, p) in &l.config.perturbations {
        named.push((id.clone(), build_g(l, p, &f, &format!("perturbations.{id}"))?));
    }
    if named.is_empty() {
        if let Some(p) = &l.config.perturbation {
            named.push(("g".to_string(), build_g(l, p, &f, "perturbation")?));
        }
    }
    let params = l.entropy_params();
    let r = entropy_local_constancy_experiment(&f, &named, &params).map_err(|e| entropy_error(l, "entropy", e))?;
    let checks = &l.config.checks;

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for s in std::iter::once(&r.reference).chain(&r.perturbed) {
        let SystemEntropy { id, chi, bowen } = s;
        if id != &r.reference.id {
            let dev = (chi.value - r.reference.chi.value).abs();
            rows.push(Row::check(id, "chi_u_deviation", dev, Some(checks.chi_tol), dev <= checks.chi_tol));
        }
        rows.push(Row::info(id, "chi_u", chi.value));
        rows.push(Row::check(id, "chi_u_spread", chi.spread, Some(checks.chi_tol), chi.spread <= checks.chi_tol));
        rows.push(Row::info(id, "bowen", bowen.estimate));
        let gap = (bowen.estimate - chi.value).abs();
        rows.push(Row::check(id, "bowen_chi_gap", gap, Some(checks.bowen_tol), gap <= checks.bowen_tol));
        lines.push(EntropyLine {
            system: id,
            chi_u: chi.value,
            chi_u_half_radius: chi.value_half,
            chi_u_spread: chi.spread,
            bowen: bowen.estimate,
            bowen_flagged: bowen.flagged,
        });
    }
    let table = csv_bytes(&lines)?;
    let report = serde_json::to_value(&r).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Outcome {
        experiment: Experiment::EntropyScan,
        rows,
        report,
        attachments: vec![],
        table: Some(("entropy.csv".into(), table)),
    })
}

fn holonomy_modulus(l: &Loaded) -> Result<Outcome, RunError> {
    let f = l.config.system.build().map_err(|e| l.error("system", None, e.to_string()))?;
    let (id, target) = match &l.config.perturbation {
        Some(p) => ("g", build_g(l, p, &f, "perturbation")?),
        None => ("f", f),
    };
    let s = splitting_for(&target).map_err(|e| entropy_error(l, "system", e))?;
    let h = &l.config.holonomy;
    let r = almost_parallel_modulus_seeded(&target, &s, &h.beta_list, h.sample_budget, l.seed())
        .map_err(|e| entropy_error(l, "holonomy", e))?;
    let ratio = l.config.checks.modulus_ratio;
    let mut rows = Vec::new();
    for row in &r.rows {
        let ok = row.failures == 0 && row.alpha <= ratio * row.beta;
        rows.push(Row::check(id, &format!("alpha(beta={})", row.beta), row.alpha, Some(ratio * row.beta), ok));
    }
    rows.push(Row::info(id, "exponent", r.exponent));
    rows.push(Row::check(id, "equicontinuous", f64::from(u8::from(r.equicontinuous)), None, r.equicontinuous));
    let report = serde_json::to_value(&r).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Outcome { experiment: Experiment::HolonomyModulus, rows, report, attachments: vec![], table: None })
}

#[derive(Serialize)]
struct ThomasOutput {
    h_f: entropy_foliation::BowenEstimate,
    h_g: entropy_foliation::BowenEstimate,
    bracket: entropy_foliation::ThomasBracket,
    single_contains: bool,
    squared_contains: bool,
    solve: SolutionReport,
}

fn thomas(l: &Loaded) -> Result<Outcome, RunError> {
    let (f, g) = systems(l, Experiment::ThomasBracket)?;
    let q = solve_theorem_Bprime(&f, &g, &center_flow(l)?, &l.solver_params()).map_err(|e| solver_error(l, e))?;
    if !q.verification.passed {
        return Err(RunError::Failed("the quasi-conjugacy did not verify".into()));
    }
    let e = l.entropy_params();
    let bowen = |m: &MapSpec| {
        bowen_entropy_seeded(m, e.bowen_n, &e.epsilon_list, e.bowen_budget, e.seed)
            .map_err(|err| entropy_error(l, "entropy", err))
    };
    let (h_f, h_g) = (bowen(&f)?, bowen(&g)?);
    let tau = q.tau_tilde.as_deref().expect("flow solve yields a time change");
    let b = thomas_bracket(h_f.estimate, tau).map_err(|err| entropy_error(l, "entropy", err))?;
    let tol = l.config.checks.thomas_tol * h_f.estimate;
    let single = b.single_contains(h_g.estimate, tol);
    let squared = b.squared_contains(h_g.estimate, tol);
    let rows = vec![
        Row::info("f", "bowen", h_f.estimate),
        Row::info("g", "bowen", h_g.estimate),
        Row::info("g", "tau_min", b.tau_min),
        Row::info("g", "tau_max", b.tau_max),
        Row::info("g", "ratio", h_g.estimate / h_f.estimate),
        Row::check("g", "single_bracket", h_g.estimate, Some(tol), single),
        Row::info("g", "squared_bracket", f64::from(u8::from(squared))),
    ];
    let out =
        ThomasOutput { h_f, h_g, bracket: b, single_contains: single, squared_contains: squared, solve: q.report() };
    let report = serde_json::to_value(&out).map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Outcome { experiment: Experiment::ThomasBracket, rows, report, attachments: vec![], table: None })
}

fn csv_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| RunError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.to_string()))
}

fn report_name(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::SolveA | Experiment::SolveBprime | Experiment::SolveB => "quasiconj.json",
        Experiment::ContractCheck => "contraction.json",
        Experiment::EntropyScan => "entropy.json",
        Experiment::HolonomyModulus => "modulus.json",
        Experiment::ThomasBracket => "thomas.json",
    }
}

/// Write every result file into `dir`; returns the file names.
pub fn write_outputs(outcome: &Outcome, formats: &[Format], dir: &Path) -> Result<Vec<String>, RunError> {
    let io = |e: std::io::Error| RunError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    if formats.contains(&Format::Json) {
        let mut text = serde_json::to_vec_pretty(&outcome.report).map_err(|e| RunError::Io(e.to_string()))?;
        text.push(b'\n');
        files.push((report_name(outcome.experiment).into(), text));
        files.extend(outcome.attachments.iter().cloned());
    }
    if formats.contains(&Format::Csv) {
        files.push(("summary.csv".into(), csv_bytes(&outcome.rows)?));
        files.extend(outcome.table.iter().cloned());
    }
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
    }
    Ok(files.into_iter().map(|(name, _)| name).collect())
}
