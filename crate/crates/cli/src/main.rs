//! `quasiconj`: run quasi-conjugacy and entropy experiments from config files.

mod catalog;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Experiment, Loaded};
use run::RunError;

#[derive(Parser)]
#[command(name = "quasiconj", version, about = "Quasi-conjugacy and entropy experiments on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Override the seed of every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Write results here instead of the configured directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Grid sizes per axis, e.g. 64,64,64.
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `experiment` key.
    Run(RunArgs),
    /// Solve for a quasi-conjugacy with a center translation.
    #[command(name = "solve-A")]
    SolveA(RunArgs),
    /// Solve for a quasi-conjugacy along the orbits of a center flow.
    #[command(name = "solve-Bprime")]
    SolveBprime(RunArgs),
    /// Solve with the transversal normalization.
    #[command(name = "solve-B")]
    SolveB(RunArgs),
    /// Measure the contraction of the fixed-point operator.
    ContractCheck(RunArgs),
    /// Unstable volume growth and separated-set entropy for each perturbation.
    EntropyScan(RunArgs),
    /// Modulus of continuity of center holonomies.
    HolonomyModulus(RunArgs),
    /// Entropy of a time change against the bracket from the solved time change.
    ThomasBracket(RunArgs),
    /// List the system kinds a config can name.
    ListCatalog {
        /// Print a JSON array instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn load(args: &RunArgs) -> Result<Loaded, ConfigError> {
    let mut loaded = Loaded::read(&args.config)?;
    if let Some(seed) = args.seed {
        loaded.config.seed = Some(seed);
    }
    if let Some(r) = &args.resolution {
        loaded.config.solver.resolution = Some(r.clone());
        let p = loaded.solver_params();
        p.validate().map_err(|e| ConfigError {
            path: args.config.clone(),
            line: None,
            message: format!("--resolution: {e}"),
        })?;
    }
    Ok(loaded)
}

fn execute(args: &RunArgs, experiment: Option<Experiment>) -> Result<bool, RunError> {
    let loaded = load(args)?;
    let experiment = match experiment.or(loaded.config.experiment) {
        Some(e) => e,
        None => {
            return Err(loaded
                .error("", Some("experiment"), "no experiment named; set `experiment` or use a subcommand")
                .into())
        }
    };
    let outcome = run::run(&loaded, experiment)?;
    for row in &outcome.rows {
        let verdict = match row.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "    ",
        };
        let tolerance = row.tolerance.map(|t| format!(" (tolerance {t:.3e})")).unwrap_or_default();
        println!("{verdict} {} {} = {:.9e}{tolerance}", row.system, row.quantity, row.value);
    }
    let dir = args.out_dir.clone().unwrap_or_else(|| loaded.output_dir());
    let files = run::write_outputs(&outcome, &loaded.config.outputs.formats, &dir)?;
    println!("{}: wrote {} to {}", experiment.name(), files.join(", "), dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, experiment) = match &cli.command {
        Command::ListCatalog { json } => {
            let d = catalog::descriptors();
            if *json {
                println!("{}", serde_json::to_string_pretty(&d).expect("static descriptors serialize"));
            } else {
                print!("{}", catalog::render_text(&d));
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(a) => (a, None),
        Command::SolveA(a) => (a, Some(Experiment::SolveA)),
        Command::SolveBprime(a) => (a, Some(Experiment::SolveBprime)),
        Command::SolveB(a) => (a, Some(Experiment::SolveB)),
        Command::ContractCheck(a) => (a, Some(Experiment::ContractCheck)),
        Command::EntropyScan(a) => (a, Some(Experiment::EntropyScan)),
        Command::HolonomyModulus(a) => (a, Some(Experiment::HolonomyModulus)),
        Command::ThomasBracket(a) => (a, Some(Experiment::ThomasBracket)),
    };
    match execute(args, experiment) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ RunError::Failed(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
