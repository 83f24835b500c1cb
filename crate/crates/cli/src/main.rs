#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limitlaw::experiments::{self, render, ExperimentConfig, ExperimentKind, Format, Table};
use limitlaw::grid::GridFunction;
use limitlaw::rate::RateBudget;
use limitlaw::Error;

#[derive(Parser)]
#[command(name = "limitlaw", version, about = "Local empirical increments under Erdős–Rényi bandwidths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output file; `.json` selects JSON, anything else CSV. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp header.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// I_p, membership and distance to Gamma_a for a grid-function file.
    Rate {
        /// Grid function JSON: {"d":..,"p":..,"masses":[..]}.
        #[arg(long)]
        input: PathBuf,
        /// Budget a of Gamma_a = {I <= 1/a}.
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Limit-law statistics (kind limit_law_sup_inf or limit_law_inf_target).
    LimitLaw(Common),
    UldpSlope(Common),
    KdeGap(Common),
    Oscillation(Common),
    Poissonization(Common),
    ProductRate(Common),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn load(common: &Common, allowed: &[ExperimentKind]) -> Result<ExperimentConfig, Error> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if !allowed.contains(&cfg.experiment) {
        let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
        return Err(Error::Config(format!(
            "config experiment {} does not match this subcommand (expected {})",
            cfg.experiment.name(),
            names.join(" or ")
        )));
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(table: &Table, name: &str, common: &Common, cfg_out: Option<&str>) -> Result<(), Error> {
    let out = common.out.clone().or_else(|| cfg_out.map(PathBuf::from));
    let format = out.as_ref().map_or(Format::Csv, |p| Format::from_path(&p.to_string_lossy()));
    let text = render(table, name, format, common.deterministic);
    match out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_experiment(common: &Common, allowed: &[ExperimentKind]) -> Result<(), Error> {
    let cfg = load(common, allowed)?;
    let table = experiments::run(&cfg, common.workers)?;
    emit(&table, cfg.experiment.name(), common, cfg.out.as_deref())
}

fn run_rate(input: &PathBuf, a: f64, tol: f64, common: &Common) -> Result<(), Error> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
    let gf: GridFunction =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid grid function: {e}")))?;
    let budget = RateBudget::new(a).map_err(|e| Error::Config(e.to_string()))?;
    if !(tol >= 1e-6) {
        return Err(Error::Config(format!("tol must be at least 1e-6, got {tol}")));
    }
    let table = experiments::rate_report(&gf, budget, tol)?;
    emit(&table, "rate", common, None)
}

fn main() -> ExitCode {
    use ExperimentKind as K;
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rate { input, a, tol, common } => run_rate(input, *a, *tol, common),
        Command::LimitLaw(c) => run_experiment(c, &[K::LimitLawSupInf, K::LimitLawInfTarget]),
        Command::UldpSlope(c) => run_experiment(c, &[K::UldpSlope]),
        Command::KdeGap(c) => run_experiment(c, &[K::KdeGap]),
        Command::Oscillation(c) => run_experiment(c, &[K::Oscillation]),
        Command::Poissonization(c) => run_experiment(c, &[K::Poissonization]),
        Command::ProductRate(c) => run_experiment(c, &[K::ProductRate]),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
