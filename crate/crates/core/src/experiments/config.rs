//! JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction};
use crate::kde::Kernel;
use crate::rate::{gamma_contains, RateBudget};
use crate::sampling::{BandwidthSchedule, DensityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LimitLawSupInf,
    LimitLawInfTarget,
    UldpSlope,
    ProductRate,
    Poissonization,
    Oscillation,
    KdeGap,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::LimitLawSupInf => "limit_law_sup_inf",
            ExperimentKind::LimitLawInfTarget => "limit_law_inf_target",
            ExperimentKind::UldpSlope => "uldp_slope",
            ExperimentKind::ProductRate => "product_rate",
            ExperimentKind::Poissonization => "poissonization",
            ExperimentKind::Oscillation => "oscillation",
            ExperimentKind::KdeGap => "kde_gap",
        }
    }
}

/// A target element of the cluster set, given either as a linear function
/// `s -> slope * prod(s)` or as explicit cell masses at resolution `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Linear { slope: f64 },
    Masses { masses: Vec<f64> },
}

impl TargetSpec {
    pub fn to_grid(&self, d: usize, p: u32) -> Result<GridFunction> {
        let grid = DyadicGrid::new(d, p)?;
        match self {
            TargetSpec::Linear { slope } => GridFunction::uniform(grid, *slope),
            TargetSpec::Masses { masses } => GridFunction::new(grid, masses.clone()),
        }
    }
}

fn default_delta() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-4
}

fn default_kernel() -> Kernel {
    Kernel::Uniform
}

fn default_batches() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: DensityModel,
    pub c: f64,
    pub n_ladder: Vec<u64>,
    /// Grid resolution of the increments.
    #[serde(default)]
    pub p: u32,
    /// Fine resolution for oscillation statistics.
    #[serde(default)]
    pub p_eval: Option<u32>,
    /// Coarse resolutions for oscillation statistics.
    #[serde(default)]
    pub p_ladder: Vec<u32>,
    /// Per-axis `[lo, hi]` of the box `H`.
    pub h_box: Vec<(f64, f64)>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    /// Bisection tolerance of the projection.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Center of single-window experiments; defaults to the lower corner of `H`.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub eps_ball: Option<f64>,
    /// `(a1, a2)` cell thresholds of the product-rate check.
    #[serde(default)]
    pub thresholds: Option<(f64, f64)>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn schedule(&self) -> Result<BandwidthSchedule> {
        BandwidthSchedule::new(self.c).map_err(as_config)
    }

    pub fn center(&self) -> Vec<f64> {
        self.z0.clone().unwrap_or_else(|| self.h_box.iter().map(|&(lo, _)| lo).collect())
    }

    pub fn target_grid(&self) -> Result<GridFunction> {
        let target = self
            .target
            .as_ref()
            .ok_or_else(|| Error::Config(format!("experiment {} needs a target", self.experiment.name())))?;
        target.to_grid(self.model.dim(), self.p).map_err(as_config)
    }

    fn require<T: Copy>(&self, v: Option<T>, field: &str) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("experiment {} needs `{field}`", self.experiment.name())))
    }

    pub fn eps(&self) -> Result<f64> {
        self.require(self.eps_ball, "eps_ball")
    }

    pub fn tau_value(&self) -> Result<f64> {
        self.require(self.tau, "tau")
    }

    pub fn threshold_pair(&self) -> Result<(f64, f64)> {
        self.require(self.thresholds, "thresholds")
    }

    pub fn fine_resolution(&self) -> Result<u32> {
        self.require(self.p_eval, "p_eval")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(as_config)?;
        let d = self.model.dim();
        let schedule = self.schedule()?;
        if self.n_ladder.is_empty() {
            return Err(Error::Config("n_ladder is empty".into()));
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_ladder must be strictly increasing".into()));
        }
        if self.n_ladder[0] < schedule.n_min() {
            return Err(Error::Config(format!(
                "n_ladder starts at {} below n_min = {} for c = {}",
                self.n_ladder[0],
                schedule.n_min(),
                self.c
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.batches == 0 {
            return Err(Error::Config("batches must be at least 1".into()));
        }
        if self.h_box.len() != d {
            return Err(Error::Config(format!("h_box has {} axes, model has {d}", self.h_box.len())));
        }
        let (o_lo, o_hi) = self.model.support();
        for &(lo, hi) in &self.h_box {
            if !(lo > o_lo && hi < o_hi && lo < hi) {
                return Err(Error::Config(format!("h_box axis [{lo}, {hi}] must lie strictly inside ({o_lo}, {o_hi})")));
            }
        }
        if !(self.tol >= 1e-6 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in [1e-6, 1), got {}", self.tol)));
        }
        DyadicGrid::new(d, self.p).map_err(as_config)?;
        if let Some(z0) = &self.z0 {
            if z0.len() != d {
                return Err(Error::Config(format!("z0 has {} coordinates, model has {d}", z0.len())));
            }
        }
        let z = self.center();
        let needs_center = matches!(
            self.experiment,
            ExperimentKind::UldpSlope | ExperimentKind::ProductRate | ExperimentKind::Oscillation
        );
        if needs_center {
            let edge = crate::increments::edge_of(schedule.bandwidth(self.n_ladder[0]).map_err(as_config)?, d);
            if !self.model.window_inside(&z, edge) {
                return Err(Error::Config(format!("window at {z:?} leaves the support at n = {}", self.n_ladder[0])));
            }
        }
        match self.experiment {
            ExperimentKind::LimitLawSupInf | ExperimentKind::Poissonization | ExperimentKind::KdeGap => {}
            ExperimentKind::LimitLawInfTarget => {
                let target = self.target_grid()?;
                let budget = RateBudget::new(self.c * self.model.density(&z)).map_err(as_config)?;
                if !gamma_contains(&target, budget) {
                    return Err(Error::Config(format!(
                        "target lies outside Gamma_a with a = c f(z0) = {}",
                        budget.a()
                    )));
                }
            }
            ExperimentKind::UldpSlope => {
                self.target_grid()?;
                positive(self.eps()?, "eps_ball")?;
            }
            ExperimentKind::ProductRate => {
                if d != 1 {
                    return Err(Error::Config("product_rate runs in d = 1".into()));
                }
                let (a1, a2) = self.threshold_pair()?;
                if !(a1 >= 0.5 && a2 >= 0.5) {
                    return Err(Error::Config(format!("thresholds must be at least the cell mean 0.5, got ({a1}, {a2})")));
                }
            }
            ExperimentKind::Oscillation => {
                let q = self.fine_resolution()?;
                DyadicGrid::new(d, q).map_err(as_config)?;
                if self.p_ladder.is_empty() || self.p_ladder.iter().any(|&p| p >= q) {
                    return Err(Error::Config(format!("p_ladder must be nonempty with every entry below p_eval = {q}")));
                }
                if !(self.tau_value()? >= 0.0) {
                    return Err(Error::Config("tau must be nonnegative".into()));
                }
            }
        }
        if matches!(self.experiment, ExperimentKind::Poissonization) {
            self.target_grid()?;
            positive(self.eps()?, "eps_ball")?;
        }
        if matches!(self.experiment, ExperimentKind::LimitLawSupInf | ExperimentKind::LimitLawInfTarget | ExperimentKind::Poissonization | ExperimentKind::KdeGap) {
            let layout_mode = crate::increments::LayoutMode::Packing;
            crate::increments::center_layout(&self.h_box, &self.model, &schedule, self.n_ladder[0], layout_mode, 1.0)
                .map_err(as_config)?;
        }
        Ok(())
    }
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{field} must be positive, got {v}")))
    }
}

pub(crate) fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
