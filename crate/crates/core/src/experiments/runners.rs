//! One runner per experiment kind. Work fans out over `(n, replicate)` and
//! over centers; results are collected in index order, so tables do not
//! depend on the worker count.

use rayon::prelude::*;

use super::config::{as_config, ExperimentConfig};
use super::output::{Cell, Table};
use super::stats::{least_squares, wilson, LineFit, Proportion};
use crate::chernoff::chernoff_h;
use crate::error::{Error, Result};
use crate::grid::{sup_norm_dist, GridFunction};
use crate::increments::{
    center_layout, collect_increment, oscillation_statistic, poissonized_window_increment, CenterLayout, IncrementSample,
    LayoutMode, Window,
};
use crate::kde::{sup_error, window_count_extremes};
use crate::projection::{dist_to_gamma, min_rate_in_ball};
use crate::rate::{gamma_contains, rate_ip, RateBudget};
use crate::sampling::{poisson_variate, DensityModel, Sample, SeedSpec, Stream};

const FIXED_SIDE: u64 = 1;
const POISSON_SIDE: u64 = 2;

/// `eps_{n,i} = 1 / (c f(z_i) log n)` over the centers of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationScale {
    pub n: u64,
    pub eps: Vec<f64>,
}

impl NormalizationScale {
    pub fn new(model: &DensityModel, layout: &CenterLayout, c: f64, n: u64) -> Self {
        let ln_n = (n as f64).ln();
        let eps = layout.centers().map(|z| (c * model.density(z) * ln_n).recip()).collect();
        NormalizationScale { n, eps }
    }

    pub fn max(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }
}

fn seeds_for(cfg: &ExperimentConfig, n: u64) -> SeedSpec {
    SeedSpec::new(cfg.seed).labelled(n)
}

/// The fixed-`n` sample of replicate `r`, sorted by first coordinate.
fn fixed_sample(cfg: &ExperimentConfig, seeds: &SeedSpec, n: u64, r: u64) -> Sample {
    let mut rng = seeds.stream(r, 0);
    let mut sample = cfg.model.sample(n as usize, &mut rng);
    sample.sort_by_first();
    sample
}

fn packing(cfg: &ExperimentConfig, n: u64) -> Result<CenterLayout> {
    center_layout(&cfg.h_box, &cfg.model, &cfg.schedule()?, n, LayoutMode::Packing, 1.0).map_err(as_config)
}

fn center_text(z: &[f64]) -> String {
    z.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(";")
}

fn tasks(cfg: &ExperimentConfig) -> Vec<(u64, u64)> {
    cfg.n_ladder
        .iter()
        .flat_map(|&n| (0..cfg.replicates as u64).map(move |r| (n, r)))
        .collect()
}

/// Evaluates `stat` at every packing center; returns the values in center order.
fn per_center<F>(cfg: &ExperimentConfig, layout: &CenterLayout, n: u64, sample: &Sample, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&Window, GridFunction) -> Result<f64> + Sync,
{
    let schedule = cfg.schedule()?;
    let centers: Vec<&[f64]> = layout.centers().collect();
    centers
        .par_iter()
        .map(|z| {
            let window = Window::new(&cfg.model, z.to_vec(), n, &schedule)?;
            let gf = collect_increment(sample, &window).to_grid(cfg.p)?;
            stat(&window, gf)
        })
        .collect()
}

/// Index of the first extreme value under `better`.
fn extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

fn limit_law_table(cfg: &ExperimentConfig, stat_name: &'static str, target: Option<&GridFunction>) -> Result<Table> {
    let schedule = cfg.schedule()?;
    let rows: Vec<Result<Vec<Cell>>> = tasks(cfg)
        .par_iter()
        .map(|&(n, r)| {
            let layout = packing(cfg, n)?;
            let seeds = seeds_for(cfg, n);
            let sample = fixed_sample(cfg, &seeds, n, r);
            let values = match target {
                None => per_center(cfg, &layout, n, &sample, |w, gf| {
                    dist_to_gamma(&gf, RateBudget::new(cfg.c * w.f_z)?, cfg.tol)
                })?,
                Some(t) => per_center(cfg, &layout, n, &sample, |_, gf| sup_norm_dist(&gf, t))?,
            };
            let at = match target {
                None => extreme(&values, |a, b| a > b),
                Some(_) => extreme(&values, |a, b| a < b),
            };
            let z = layout.centers().nth(at).expect("layout is nonempty");
            let scale = NormalizationScale::new(&cfg.model, &layout, cfg.c, n);
            Ok(vec![
                n.into(),
                r.into(),
                seeds.derive(r, 0).into(),
                schedule.bandwidth(n)?.into(),
                layout.count().into(),
                scale.max().into(),
                values[at].into(),
                center_text(z).into(),
            ])
        })
        .collect();
    let mut table = Table::new(vec!["n", "replicate", "seed", "h_n", "windows", "eps_max", stat_name, "center"]);
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

/// `D_n = max_z dist(Delta_n(z), Gamma_{c f(z)})` over packing centers, one
/// row per `(n, replicate)`.
pub fn run_limit_law_sup_inf(cfg: &ExperimentConfig) -> Result<Table> {
    limit_law_table(cfg, "d_n", None)
}

/// `min_z ||Delta_n(z) - target||` over packing centers.
pub fn run_limit_law_inf_target(cfg: &ExperimentConfig) -> Result<Table> {
    let target = cfg.target_grid()?;
    let budget = RateBudget::new(cfg.c * cfg.model.density(&cfg.center())).map_err(as_config)?;
    if !gamma_contains(&target, budget) {
        return Err(Error::Config(format!("target lies outside Gamma_a with a = {}", budget.a())));
    }
    limit_law_table(cfg, "inf_distance", Some(&target))
}

/// Runs `trial` on independent window-local Poissonized increments at `z0`
/// and counts successes; replicate `r` always sees the same stream.
fn window_frequency<T, F>(cfg: &ExperimentConfig, n: u64, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&IncrementSample) -> Result<T> + Sync,
{
    let window = Window::new(&cfg.model, cfg.center(), n, &cfg.schedule()?).map_err(as_config)?;
    let seeds = seeds_for(cfg, n);
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng: Stream = seeds.stream(r, 0);
            let inc = poissonized_window_increment(&cfg.model, &window, &mut rng)?;
            trial(&inc)
        })
        .collect()
}

fn proportion_cells(p: &Proportion) -> Vec<Cell> {
    vec![p.trials.into(), p.successes.into(), p.estimate.into(), p.lower.into(), p.upper.into()]
}

/// Log-log fit over the `n` with at least one success.
fn slope_fit(ladder: &[u64], props: &[Proportion]) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = ladder
        .iter()
        .zip(props)
        .filter(|(_, p)| p.successes > 0)
        .map(|(&n, p)| ((n as f64).ln(), p.estimate.ln()))
        .unzip();
    least_squares(&x, &y)
}

fn fit_cells(fit: Option<&LineFit>) -> [Cell; 6] {
    match fit {
        Some(f) => [
            f.slope.into(),
            f.intercept.into(),
            f.slope_se.into(),
            f.residual_rms.into(),
            f.max_abs_residual.into(),
            f.r_squared.into(),
        ],
        None => [Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

/// Frequency of `{ ||Delta Pi_n(z0) - target|| < eps }` per `n` and the
/// regression slope of its logarithm on `log n`.
pub fn run_uldp_slope(cfg: &ExperimentConfig) -> Result<Table> {
    let target = cfg.target_grid()?;
    let eps = cfg.eps()?;
    let z0 = cfg.center();
    let af = cfg.c * cfg.model.density(&z0);
    let mut props = Vec::new();
    for &n in &cfg.n_ladder {
        let hits = window_frequency(cfg, n, |inc| Ok(sup_norm_dist(&inc.to_grid(cfg.p)?, &target)? < eps))?;
        props.push(wilson(hits.iter().filter(|&&b| b).count() as u64, hits.len() as u64));
    }
    let fit = slope_fit(&cfg.n_ladder, &props);
    let predicted = if cfg.model.dim() == 1 { Some(-af * min_rate_in_ball(&target, eps)?) } else { None };

    let mut table = Table::new(vec![
        "kind", "n", "eps_n", "trials", "successes", "p_hat", "ci_lower", "ci_upper", "dropped", "slope", "intercept",
        "slope_se", "residual_rms", "max_abs_residual", "r_squared", "predicted_slope",
    ]);
    for (&n, p) in cfg.n_ladder.iter().zip(&props) {
        let mut row: Vec<Cell> = vec!["point".into(), n.into(), (af * (n as f64).ln()).recip().into()];
        row.extend(proportion_cells(p));
        row.push((p.successes == 0).into());
        row.extend(std::iter::repeat_n(Cell::Empty, 7));
        table.push(row);
    }
    let mut row: Vec<Cell> = vec!["fit".into()];
    row.extend(std::iter::repeat_n(Cell::Empty, 7));
    row.push((props.iter().filter(|p| p.successes == 0).count() as u64).into());
    row.extend(fit_cells(fit.as_ref()));
    row.push(predicted.into());
    table.push(row);
    Ok(table)
}

/// Joint and marginal upper deviations of the two half-window masses.
pub fn run_product_rate_check(cfg: &ExperimentConfig) -> Result<Table> {
    let (a1, a2) = cfg.threshold_pair()?;
    let af = cfg.c * cfg.model.density(&cfg.center());
    let events = ["m1", "m2", "joint"];
    let mut props: [Vec<Proportion>; 3] = Default::default();
    for &n in &cfg.n_ladder {
        let outcomes = window_frequency(cfg, n, |inc| {
            let gf = inc.to_grid(1)?;
            let m = gf.masses();
            Ok((m[0] >= a1, m[1] >= a2))
        })?;
        let total = outcomes.len() as u64;
        let k1 = outcomes.iter().filter(|o| o.0).count() as u64;
        let k2 = outcomes.iter().filter(|o| o.1).count() as u64;
        let kj = outcomes.iter().filter(|o| o.0 && o.1).count() as u64;
        for (slot, k) in props.iter_mut().zip([k1, k2, kj]) {
            slot.push(wilson(k, total));
        }
    }
    let h = |x: f64| chernoff_h(x).to_f64();
    let marginal = [-af * 0.5 * h(2.0 * a1), -af * 0.5 * h(2.0 * a2)];
    let predicted = [marginal[0], marginal[1], marginal[0] + marginal[1]];

    let mut table = Table::new(vec![
        "kind", "event", "n", "trials", "successes", "p_hat", "ci_lower", "ci_upper", "dropped", "slope", "intercept",
        "residual_rms", "r_squared", "predicted_slope", "difference",
    ]);
    for (i, &n) in cfg.n_ladder.iter().enumerate() {
        for (e, name) in events.iter().enumerate() {
            let p = &props[e][i];
            let mut row: Vec<Cell> = vec!["point".into(), (*name).into(), n.into()];
            row.extend(proportion_cells(p));
            row.push((p.successes == 0).into());
            row.extend(std::iter::repeat_n(Cell::Empty, 6));
            table.push(row);
        }
    }
    let fits: Vec<Option<LineFit>> = props.iter().map(|p| slope_fit(&cfg.n_ladder, p)).collect();
    for (e, name) in events.iter().enumerate() {
        let dropped = props[e].iter().filter(|p| p.successes == 0).count() as u64;
        let mut row: Vec<Cell> = vec!["fit".into(), (*name).into()];
        row.extend(std::iter::repeat_n(Cell::Empty, 6));
        row.push(dropped.into());
        match &fits[e] {
            Some(f) => row.extend([f.slope.into(), f.intercept.into(), f.residual_rms.into(), f.r_squared.into()]),
            None => row.extend(std::iter::repeat_n(Cell::Empty, 4)),
        }
        row.push(predicted[e].into());
        row.push(Cell::Empty);
        table.push(row);
    }
    let difference = match (&fits[0], &fits[1], &fits[2]) {
        (Some(f1), Some(f2), Some(fj)) => Some(fj.slope - f1.slope - f2.slope),
        _ => None,
    };
    let mut row: Vec<Cell> = vec!["comparison".into(), "joint_minus_sum".into()];
    row.extend(std::iter::repeat_n(Cell::Empty, 12));
    row.push(difference.into());
    table.push(row);
    Ok(table)
}

/// Whether every packing window misses the ball of radius `eps` around `target`.
fn all_windows_miss(
    cfg: &ExperimentConfig,
    layout: &CenterLayout,
    n: u64,
    sample: &Sample,
    target: &GridFunction,
    eps: f64,
) -> Result<bool> {
    let schedule = cfg.schedule()?;
    for z in layout.centers() {
        let window = Window::new(&cfg.model, z.to_vec(), n, &schedule)?;
        let gf = collect_increment(sample, &window).to_grid(cfg.p)?;
        if sup_norm_dist(&gf, target)? < eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Batch estimates of `P(E)` under the fixed-`n` sample (lhs) and under a
/// `Poisson(n)` sample (rhs), with `E` = all packing windows miss the ball.
/// A batch holds unless the lhs interval lies entirely above `2 *` the rhs
/// interval.
pub fn run_poissonization_check(cfg: &ExperimentConfig) -> Result<Table> {
    let target = cfg.target_grid()?;
    let eps = cfg.eps()?;
    let r_per = cfg.replicates as u64;
    let mut table = Table::new(vec![
        "n", "batch", "trials", "lhs", "lhs_lower", "lhs_upper", "rhs", "rhs_lower", "rhs_upper", "two_rhs", "holds",
    ]);
    for &n in &cfg.n_ladder {
        let layout = packing(cfg, n)?;
        let seeds = seeds_for(cfg, n);
        let fixed = seeds.labelled(FIXED_SIDE);
        let poisson = seeds.labelled(POISSON_SIDE);
        let jobs: Vec<(u64, u64)> = (0..cfg.batches as u64).flat_map(|b| (0..r_per).map(move |r| (b, r))).collect();
        let outcomes: Vec<Result<(bool, bool)>> = jobs
            .par_iter()
            .map(|&(b, r)| {
                let idx = b * r_per + r;
                let lhs_sample = fixed_sample(cfg, &fixed, n, idx);
                let mut rng = poisson.stream(idx, 0);
                let eta = poisson_variate(n as f64, &mut rng);
                let mut rhs_sample = cfg.model.sample(eta as usize, &mut rng);
                rhs_sample.sort_by_first();
                Ok((
                    all_windows_miss(cfg, &layout, n, &lhs_sample, &target, eps)?,
                    all_windows_miss(cfg, &layout, n, &rhs_sample, &target, eps)?,
                ))
            })
            .collect();
        let outcomes: Vec<(bool, bool)> = outcomes.into_iter().collect::<Result<_>>()?;
        for (b, chunk) in outcomes.chunks(r_per as usize).enumerate() {
            let lhs = wilson(chunk.iter().filter(|o| o.0).count() as u64, r_per);
            let rhs = wilson(chunk.iter().filter(|o| o.1).count() as u64, r_per);
            let holds = lhs.lower <= 2.0 * rhs.upper;
            table.push(vec![
                n.into(),
                (b as u64).into(),
                r_per.into(),
                lhs.estimate.into(),
                lhs.lower.into(),
                lhs.upper.into(),
                rhs.estimate.into(),
                rhs.lower.into(),
                rhs.upper.into(),
                (2.0 * rhs.estimate).into(),
                holds.into(),
            ]);
        }
    }
    Ok(table)
}

/// Frequency of `{ oscillation at coarse p >= tau }` for Poissonized
/// increments built at `p_eval`; each replicate is shared across the `p`.
pub fn run_oscillation_decay(cfg: &ExperimentConfig) -> Result<Table> {
    let tau = cfg.tau_value()?;
    let q = cfg.fine_resolution()?;
    let mut table = Table::new(vec!["n", "p", "trials", "successes", "frequency", "ci_lower", "ci_upper"]);
    for &n in &cfg.n_ladder {
        let stats: Vec<Vec<f64>> = window_frequency(cfg, n, |inc| {
            let fine = inc.to_grid(q)?;
            cfg.p_ladder.iter().map(|&p| oscillation_statistic(&fine, p)).collect()
        })?;
        for (j, &p) in cfg.p_ladder.iter().enumerate() {
            let hits = stats.iter().filter(|s| s[j] >= tau).count() as u64;
            let prop = wilson(hits, stats.len() as u64);
            let mut row: Vec<Cell> = vec![n.into(), p.into()];
            row.extend(proportion_cells(&prop));
            table.push(row);
        }
    }
    Ok(table)
}

/// KDE sup-error over packing centers and normalised occupancy extremes.
pub fn run_kde_gap(cfg: &ExperimentConfig) -> Result<Table> {
    let schedule = cfg.schedule()?;
    let rows: Vec<Result<Vec<Cell>>> = tasks(cfg)
        .par_iter()
        .map(|&(n, r)| {
            let layout = packing(cfg, n)?;
            let seeds = seeds_for(cfg, n);
            let sample = fixed_sample(cfg, &seeds, n, r);
            let h_n = schedule.bandwidth(n)?;
            let err = sup_error(&sample, cfg.kernel, &cfg.model, &layout, h_n, n);
            let ext = window_count_extremes(&sample, &layout, &cfg.model, h_n, n);
            Ok(vec![
                r.into(),
                seeds.derive(r, 0).into(),
                n.into(),
                cfg.c.into(),
                cfg.model.name().into(),
                cfg.kernel.name().into(),
                layout.count().into(),
                err.into(),
                ext.min_ratio.into(),
                ext.max_ratio.into(),
                ext.mean_ratio.into(),
            ])
        })
        .collect();
    let mut table = Table::new(vec![
        "replicate", "seed", "n", "c", "model", "kernel", "windows", "sup_error", "min_ratio", "max_ratio", "mean_ratio",
    ]);
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

/// `I_p`, membership and distance to `Gamma_a` for one grid function.
pub fn rate_report(gf: &GridFunction, budget: RateBudget, tol: f64) -> Result<Table> {
    let grid = gf.grid();
    let mut table = Table::new(vec![
        "d", "p", "cells", "total_mass", "rate_ip", "a", "level", "in_gamma", "dist_to_gamma",
    ]);
    table.push(vec![
        grid.dim().into(),
        grid.resolution().into(),
        grid.num_cells().into(),
        gf.total_mass().into(),
        rate_ip(gf).to_f64().into(),
        budget.a().into(),
        budget.level().into(),
        gamma_contains(gf, budget).into(),
        dist_to_gamma(gf, budget, tol)?.into(),
    ]);
    Ok(table)
}
