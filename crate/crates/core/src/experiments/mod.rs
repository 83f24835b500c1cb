//! Config-driven Monte Carlo experiments producing result tables.

mod config;
mod output;
mod runners;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, TargetSpec};
pub use output::{render, Cell, Format, Table};
pub use runners::{
    rate_report, run_kde_gap, run_limit_law_inf_target, run_limit_law_sup_inf, run_oscillation_decay,
    run_poissonization_check, run_product_rate_check, run_uldp_slope, NormalizationScale,
};

use crate::error::{Error, Result};

/// Validates `cfg` and runs it on a pool of `workers` threads.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<Table> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::LimitLawSupInf => run_limit_law_sup_inf(cfg),
        ExperimentKind::LimitLawInfTarget => run_limit_law_inf_target(cfg),
        ExperimentKind::UldpSlope => run_uldp_slope(cfg),
        ExperimentKind::ProductRate => run_product_rate_check(cfg),
        ExperimentKind::Poissonization => run_poissonization_check(cfg),
        ExperimentKind::Oscillation => run_oscillation_decay(cfg),
        ExperimentKind::KdeGap => run_kde_gap(cfg),
    })
}
