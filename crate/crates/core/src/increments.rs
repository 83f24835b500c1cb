//! Local empirical increments `Delta_n(z, h_n, s)` and their Poissonized
//! versions, reduced to grid functions.
//!
//! The window at center `z` is the half-open box `z + h_n^{1/d} [0,1)^d`.
//! A sample point `Z` enters with relative position `(Z - z) / h_n^{1/d}`,
//! and the increment at `s` counts relative positions in `[0, s)`, divided
//! by `c f(z) log n`.

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction};
use crate::sampling::{poisson_variate, BandwidthSchedule, DensityModel, Sample};

/// Geometry and normalisation of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub center: Vec<f64>,
    pub n: u64,
    pub h_n: f64,
    pub c: f64,
    pub f_z: f64,
}

impl Window {
    pub fn new(model: &DensityModel, center: Vec<f64>, n: u64, schedule: &BandwidthSchedule) -> Result<Window> {
        let h_n = schedule.bandwidth(n)?;
        let f_z = model.density(&center);
        let w = Window { center, n, h_n, c: schedule.c(), f_z };
        w.check_inside(model)?;
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Per-axis edge `h_n^{1/d}`.
    pub fn edge(&self) -> f64 {
        edge_of(self.h_n, self.dim())
    }

    /// `c f(z) log n`.
    pub fn normalization(&self) -> f64 {
        self.c * self.f_z * (self.n as f64).ln()
    }

    pub fn check_inside(&self, model: &DensityModel) -> Result<()> {
        if self.dim() != model.dim() {
            return Err(Error::Domain(format!(
                "center has {} coordinates, model has dimension {}",
                self.dim(),
                model.dim()
            )));
        }
        if !model.window_inside(&self.center, self.edge()) {
            return Err(Error::WindowEscapes(format!(
                "window at {:?} with edge {} leaves the support",
                self.center,
                self.edge()
            )));
        }
        Ok(())
    }

    /// Relative position of `x`, if it falls in the window.
    fn relative(&self, x: &[f64], edge: f64, out: &mut [f64]) -> bool {
        for (k, (&xk, &zk)) in x.iter().zip(&self.center).enumerate() {
            let r = (xk - zk) / edge;
            if !(0.0..1.0).contains(&r) {
                return false;
            }
            out[k] = r;
        }
        true
    }
}

pub(crate) fn edge_of(h: f64, d: usize) -> f64 {
    match d {
        1 => h,
        2 => h.sqrt(),
        3 => h.cbrt(),
        _ => h.powf((d as f64).recip()),
    }
}

/// One realisation of an increment at a center.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    pub window: Window,
    /// Window-relative positions in `[0,1)^d`, flat.
    pub relative: Vec<f64>,
}

impl IncrementSample {
    pub fn count(&self) -> usize {
        self.relative.len() / self.window.dim().max(1)
    }

    pub fn normalization(&self) -> f64 {
        self.window.normalization()
    }

    /// Cell counts at resolution `p`.
    pub fn cell_counts(&self, p: u32) -> Result<Vec<u64>> {
        let grid = DyadicGrid::new(self.window.dim(), p)?;
        let mut counts = vec![0u64; grid.num_cells()];
        for r in self.relative.chunks_exact(self.window.dim()) {
            let cell = grid.locate(r).expect("relative positions lie in [0,1)^d");
            counts[cell] += 1;
        }
        Ok(counts)
    }

    /// Grid function with cell masses `count / (c f(z) log n)`.
    pub fn to_grid(&self, p: u32) -> Result<GridFunction> {
        let grid = DyadicGrid::new(self.window.dim(), p)?;
        let norm = self.normalization();
        let masses = self.cell_counts(p)?.into_iter().map(|k| k as f64 / norm).collect();
        GridFunction::new(grid, masses)
    }

    pub fn record(&self, p: u32) -> Result<IncrementRecord> {
        Ok(IncrementRecord {
            center: self.window.center.clone(),
            n: self.window.n,
            h_n: self.window.h_n,
            count: self.count(),
            normalization: self.normalization(),
            grid_function: self.to_grid(p)?,
        })
    }
}

/// JSON export form of an increment.
#[derive(Debug, Clone, Serialize)]
pub struct IncrementRecord {
    pub center: Vec<f64>,
    pub n: u64,
    pub h_n: f64,
    pub count: usize,
    pub normalization: f64,
    pub grid_function: GridFunction,
}

/// Collects the sample points inside the window.
pub fn collect_increment(points: &Sample, window: &Window) -> IncrementSample {
    let d = window.dim();
    assert_eq!(points.dim(), d, "sample and window dimensions differ");
    let edge = window.edge();
    let mut relative = Vec::new();
    let mut buf = [0.0; 3];
    let lo = window.center[0];
    for x in points.candidates(lo, lo + edge) {
        if window.relative(x, edge, &mut buf[..d]) {
            relative.extend_from_slice(&buf[..d]);
        }
    }
    IncrementSample { window: window.clone(), relative }
}

/// `Delta_n(z, h_n, .)` at resolution `p`.
pub fn increment_process(points: &Sample, window: &Window, model: &DensityModel, p: u32) -> Result<GridFunction> {
    window.check_inside(model)?;
    collect_increment(points, window).to_grid(p)
}

/// Poissonized increment from a full sample: `eta ~ Poisson(n)` i.i.d.
/// points, of which those inside the window are kept.
pub fn poissonized_increment<R: RngCore + ?Sized>(
    model: &DensityModel,
    window: &Window,
    rng: &mut R,
) -> Result<IncrementSample> {
    window.check_inside(model)?;
    let eta = poisson_variate(window.n as f64, rng);
    let sample = model.sample(eta as usize, rng);
    Ok(collect_increment(&sample, window))
}

/// Same law as [`poissonized_increment`] restricted to the window, drawn
/// directly: the window count is `Poisson(n P(W))` and, given the count, the
/// points are i.i.d. from the conditional law on `W`.
pub fn poissonized_window_increment<R: RngCore + ?Sized>(
    model: &DensityModel,
    window: &Window,
    rng: &mut R,
) -> Result<IncrementSample> {
    window.check_inside(model)?;
    let d = window.dim();
    let edge = window.edge();
    let mean = window.n as f64 * model.window_probability(&window.center, edge);
    let count = poisson_variate(mean, rng) as usize;
    let mut relative = vec![0.0; count * d];
    for r in relative.chunks_exact_mut(d) {
        model.sample_in_window(&window.center, edge, rng, r);
    }
    Ok(IncrementSample { window: window.clone(), relative })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    /// Disjoint windows on a lattice inside the box.
    Packing,
    /// Overlapping windows covering the box.
    Covering,
}

/// Window centers for a box.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterLayout {
    pub mode: LayoutMode,
    pub d: usize,
    /// Flat `m * d` center coordinates, row-major over the per-axis lattices.
    pub centers: Vec<f64>,
    pub edge: f64,
}

impl CenterLayout {
    pub fn count(&self) -> usize {
        self.centers.len() / self.d
    }

    pub fn centers(&self) -> std::slice::ChunksExact<'_, f64> {
        self.centers.chunks_exact(self.d)
    }

    /// Whether the windows are pairwise disjoint (interval overlap test on
    /// every axis).
    pub fn pairwise_disjoint(&self) -> bool {
        let cs: Vec<&[f64]> = self.centers().collect();
        for (i, a) in cs.iter().enumerate() {
            for b in &cs[i + 1..] {
                let overlap = a.iter().zip(b.iter()).all(|(&x, &y)| x < y + self.edge && y < x + self.edge);
                if overlap {
                    return false;
                }
            }
        }
        true
    }
}

fn axis_centers(lo: f64, hi: f64, edge: f64, mode: LayoutMode) -> Vec<f64> {
    let len = hi - lo;
    let slack = 1e-12 * len.max(1.0);
    match mode {
        LayoutMode::Packing => {
            let m = ((len + slack) / edge).floor() as usize;
            (0..m).map(|j| lo + j as f64 * edge).collect()
        }
        LayoutMode::Covering => {
            let last = hi - edge;
            let mut out = Vec::new();
            let mut j = 0usize;
            loop {
                let c = lo + j as f64 * edge;
                if c >= last - slack {
                    break;
                }
                out.push(c);
                j += 1;
            }
            out.push(last);
            out
        }
    }
}

/// Lays out window centers in `h_box` for sample size `n`. The per-axis edge
/// is `(delta h_n)^{1/d}`; packing requires `delta = 1`.
pub fn center_layout(
    h_box: &[(f64, f64)],
    model: &DensityModel,
    schedule: &BandwidthSchedule,
    n: u64,
    mode: LayoutMode,
    delta: f64,
) -> Result<CenterLayout> {
    let d = model.dim();
    if h_box.len() != d {
        return Err(Error::Config(format!("box has {} axes, model has {d}", h_box.len())));
    }
    if mode == LayoutMode::Packing && delta != 1.0 {
        return Err(Error::Config(format!("packing layout needs delta = 1, got {delta}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let edge = edge_of(delta * schedule.bandwidth(n)?, d);
    layout_with_edge(h_box, model, edge, mode)
}

pub fn layout_with_edge(h_box: &[(f64, f64)], model: &DensityModel, edge: f64, mode: LayoutMode) -> Result<CenterLayout> {
    let d = model.dim();
    let (o_lo, o_hi) = model.support();
    let mut axes = Vec::with_capacity(d);
    for &(lo, hi) in h_box {
        if !(lo > o_lo && hi < o_hi) {
            return Err(Error::Config(format!("box [{lo}, {hi}] is not strictly inside the support")));
        }
        if hi - lo < edge {
            return Err(Error::Config(format!("box [{lo}, {hi}] is smaller than one window ({edge})")));
        }
        axes.push(axis_centers(lo, hi, edge, mode));
    }
    let total: usize = axes.iter().map(Vec::len).product();
    let mut centers = Vec::with_capacity(total * d);
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = [0usize; 3];
        for k in (0..d).rev() {
            idx[k] = rem % axes[k].len();
            rem /= axes[k].len();
        }
        for k in 0..d {
            centers.push(axes[k][idx[k]]);
        }
    }
    Ok(CenterLayout { mode, d, centers, edge })
}

/// Largest within-cell rise of a fine grid function over the cells of the
/// coarse resolution `p`, bounded by the cumulative at the coarse cell's
/// upper corner minus that at its lower corner.
pub fn oscillation_statistic(gf_fine: &GridFunction, p: u32) -> Result<f64> {
    let grid = gf_fine.grid();
    let q = grid.resolution();
    if p >= q {
        return Err(Error::GridMismatch(format!("coarse resolution {p} must be below {q}")));
    }
    let d = grid.dim();
    if d == 1 {
        return Ok(gf_fine.coarsen(p)?.masses().iter().copied().fold(0.0, f64::max));
    }
    let c = gf_fine.cumulative();
    let coarse = DyadicGrid::new(d, p)?;
    let shift = q - p;
    let mut best = 0.0f64;
    for flat in 0..coarse.num_cells() {
        let i = coarse.cell_index(flat);
        let (mut lo, mut hi) = ([0usize; 3], [0usize; 3]);
        for k in 0..d {
            lo[k] = i[k] << shift;
            hi[k] = (i[k] + 1) << shift;
        }
        best = best.max(c[grid.flat_corner(&hi[..d])] - c[grid.flat_corner(&lo[..d])]);
    }
    Ok(best)
}

/// Both sides of the rescaling identity between `Delta_n` and the block
/// process `H_n` evaluated on the same sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RescalingReport {
    /// `(h_n / h_{n_k})^{1/d}`.
    pub rho: f64,
    /// `f(z_k) log n_k / (f(z)^2 log n)`.
    pub t_factor: f64,
    pub corners_checked: usize,
    pub max_count_discrepancy: u64,
    pub max_value_discrepancy: f64,
}

/// Checks `Delta_n(z, h_n, s) = T (f(z) / f(z_k)) H_n(z, rho s)` on every
/// lattice corner `s` of resolution `p` with `rho s` inside `[0,1)^d`, where
/// `H_n(z, s)` counts points with `(Z - z) / h_{n_k}^{1/d}` in `[0, s)` over
/// `c log n_k`. Requires `n <= n_k`.
#[allow(clippy::too_many_arguments)]
pub fn rescaling_identity_check(
    points: &Sample,
    z: &[f64],
    n: u64,
    n_k: u64,
    schedule: &BandwidthSchedule,
    p: u32,
    f_z: f64,
    f_zk: f64,
) -> Result<RescalingReport> {
    if n > n_k {
        return Err(Error::Domain(format!("n = {n} lies beyond the block end n_k = {n_k}")));
    }
    let d = z.len();
    let grid = DyadicGrid::new(d, p)?;
    let h_n = schedule.bandwidth(n)?;
    let h_k = schedule.bandwidth(n_k)?;
    let rho = edge_of(h_n / h_k, d);
    let edge_n = edge_of(h_n, d);
    let edge_k = edge_of(h_k, d);
    let c = schedule.c();
    let (ln_n, ln_k) = ((n as f64).ln(), (n_k as f64).ln());
    let t_factor = f_zk * ln_k / (f_z * f_z * ln_n);
    let step = (grid.side() as f64).recip();

    let rel_n: Vec<Vec<f64>> = points
        .points()
        .map(|x| x.iter().zip(z).map(|(&xk, &zk)| (xk - zk) / edge_n).collect())
        .collect();
    let rel_k: Vec<Vec<f64>> = points
        .points()
        .map(|x| x.iter().zip(z).map(|(&xk, &zk)| (xk - zk) / edge_k).collect())
        .collect();

    let mut report = RescalingReport {
        rho,
        t_factor,
        corners_checked: 0,
        max_count_discrepancy: 0,
        max_value_discrepancy: 0.0,
    };
    for flat in 0..grid.num_corners() {
        let j = grid.corner_index(flat);
        let s: Vec<f64> = j[..d].iter().map(|&jk| jk as f64 * step).collect();
        let rs: Vec<f64> = s.iter().map(|&sk| rho * sk).collect();
        if !rs.iter().all(|&v| v < 1.0) || !s.iter().all(|&v| v < 1.0) {
            continue;
        }
        let inside = |r: &[f64], bound: &[f64]| r.iter().zip(bound).all(|(&a, &b)| a >= 0.0 && a < b);
        let lhs_count = rel_n.iter().filter(|r| inside(r, &s)).count() as u64;
        let rhs_count = rel_k.iter().filter(|r| inside(r, &rs)).count() as u64;
        let lhs = lhs_count as f64 / (c * f_z * ln_n);
        let rhs = t_factor * (f_z / f_zk) * (rhs_count as f64 / (c * ln_k));
        report.corners_checked += 1;
        report.max_count_discrepancy = report.max_count_discrepancy.max(lhs_count.abs_diff(rhs_count));
        report.max_value_discrepancy = report.max_value_discrepancy.max((lhs - rhs).abs());
    }
    Ok(report)
}
