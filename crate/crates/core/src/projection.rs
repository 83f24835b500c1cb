//! Sup-norm distance from a grid function to `Gamma_a`.
//!
//! The distance is found by bisection on the radius `t`. For a given `t`
//! the inner problem is
//!
//! ```text
//! minimise   sum_i w h(x_i / w)            (w = 2^-pd, x >= 0)
//! subject to |C_x(j) - C_g(j)| <= t        for every lattice corner j
//! ```
//!
//! where `C` is the cumulative corner value. `t` is feasible iff the minimum
//! is at most `1/a`. Two inner solvers are provided:
//!
//! * [`InnerSolver::TautString`] (`d = 1` only): for a fixed end value the
//!   taut string through the tube minimises every separable convex cost of
//!   the increments, so only the end value needs a 1-D convex search.
//! * [`InnerSolver::DualAscent`] (any `d`): exact coordinate ascent on the
//!   Lagrange dual. The conjugate of `w h(x/w)` is `w (e^v - 1)`, so each
//!   coordinate step rescales the masses of one lower orthant by `e^delta`.

use crate::error::{Error, Result};
use crate::grid::{sup_norm_dist, DyadicGrid, GridFunction};
use crate::rate::{rate_of_masses, RateBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Taut string for `d = 1`, dual ascent otherwise.
    Auto,
    TautString,
    DualAscent,
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    pub solver: InnerSolver,
    pub max_bisections: usize,
    pub max_sweeps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { solver: InnerSolver::Auto, max_bisections: 200, max_sweeps: 200_000 }
    }
}

/// Outcome of a projection: the bracket `[lower, distance]` has width below
/// the requested tolerance and `nearest` attains `distance`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub distance: f64,
    pub lower: f64,
    pub nearest: GridFunction,
}

/// `inf { ||gf - x|| : x in Gamma_a }` to within `tol`, over piecewise-uniform
/// grid functions `x` on the grid of `gf`.
pub fn dist_to_gamma(gf: &GridFunction, budget: RateBudget, tol: f64) -> Result<f64> {
    project_onto_gamma(gf, budget, tol, ProjectionOptions::default()).map(|p| p.distance)
}

pub fn project_onto_gamma(
    gf: &GridFunction,
    budget: RateBudget,
    tol: f64,
    opts: ProjectionOptions,
) -> Result<Projection> {
    if !(tol >= 1e-6) {
        return Err(Error::Domain(format!("projection tolerance must be >= 1e-6, got {tol}")));
    }
    let grid = gf.grid();
    let level = budget.level();
    let volume = grid.cell_volume();
    if rate_of_masses(gf.masses(), volume) <= level {
        return Ok(Projection { distance: 0.0, lower: 0.0, nearest: gf.clone() });
    }
    let solver = match opts.solver {
        InnerSolver::Auto if grid.dim() == 1 => InnerSolver::TautString,
        InnerSolver::Auto => InnerSolver::DualAscent,
        InnerSolver::TautString if grid.dim() != 1 => {
            return Err(Error::Domain("taut-string solver needs d = 1".into()))
        }
        s => s,
    };
    // The identity has rate 0, so its distance is always feasible.
    let identity = GridFunction::identity(grid);
    let mut hi = sup_norm_dist(gf, &identity)?;
    let mut best = identity;
    let mut lo = 0.0;
    let band = Band::new(gf, solver == InnerSolver::DualAscent);
    let mut iterations = 0;
    while hi - lo >= tol {
        if iterations == opts.max_bisections {
            return Err(Error::NonConvergence { lo, hi, iterations });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let witness = match solver {
            InnerSolver::TautString => band.taut_string_feasible(mid, level),
            _ => band.dual_ascent_feasible(mid, level, opts.max_sweeps).map_err(|sweeps| {
                Error::NonConvergence { lo, hi, iterations: sweeps }
            })?,
        };
        match witness {
            Some(x) => {
                hi = mid;
                best = GridFunction::new(grid, x)?;
            }
            None => lo = mid,
        }
    }
    Ok(Projection { distance: hi, lower: lo, nearest: best })
}

/// `inf { I_p(x) : ||x - gf|| <= radius }` for `d = 1` grid functions: the
/// large-deviation cost of the closed sup-norm ball around `gf`.
pub fn min_rate_in_ball(gf: &GridFunction, radius: f64) -> Result<f64> {
    if gf.grid().dim() != 1 {
        return Err(Error::Domain("min_rate_in_ball is implemented for d = 1".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {radius}")));
    }
    let band = Band::new(gf, false);
    let x = band.taut_string_minimizer(radius);
    Ok(rate_of_masses(&x, gf.grid().cell_volume()))
}

/// Target cumulative values and constraint structure of one projection.
struct Band {
    grid: DyadicGrid,
    volume: f64,
    /// Cumulative target at each constrained corner (all indices >= 1).
    targets: Vec<f64>,
    /// Cells of the lower orthant `[0, s_j)` for each constrained corner
    /// (general-d solver only).
    orthants: Vec<Vec<u32>>,
}

impl Band {
    fn new(gf: &GridFunction, with_orthants: bool) -> Band {
        let grid = gf.grid();
        let d = grid.dim();
        if d == 1 {
            let targets = gf.corner_values_1d()[1..].to_vec();
            let orthants = if with_orthants {
                (1..=grid.side()).map(|j| (0..j as u32).collect()).collect()
            } else {
                Vec::new()
            };
            return Band { grid, volume: grid.cell_volume(), targets, orthants };
        }
        let c = gf.cumulative();
        let mut targets = Vec::with_capacity(grid.num_cells());
        let mut orthants = Vec::with_capacity(grid.num_cells());
        for flat in 0..grid.num_cells() {
            let i = grid.cell_index(flat);
            let mut corner = [0usize; 3];
            for k in 0..d {
                corner[k] = i[k] + 1;
            }
            targets.push(c[grid.flat_corner(&corner[..d])]);
            let members = (0..grid.num_cells())
                .filter(|&cell| {
                    let ci = grid.cell_index(cell);
                    (0..d).all(|k| ci[k] < corner[k])
                })
                .map(|cell| cell as u32)
                .collect();
            orthants.push(members);
        }
        Band { grid, volume: grid.cell_volume(), targets, orthants }
    }

    /// `d = 1`: the feasibility decision from the band minimiser.
    fn taut_string_feasible(&self, t: f64, level: f64) -> Option<Vec<f64>> {
        let x = self.taut_string_minimizer(t);
        (rate_of_masses(&x, self.volume) <= level).then_some(x)
    }

    /// `d = 1`: minimum over the end value `E` of the taut-string cost.
    fn taut_string_minimizer(&self, t: f64) -> Vec<f64> {
        let k = self.targets.len();
        let lower: Vec<f64> = self.targets.iter().map(|y| y - t).collect();
        let upper: Vec<f64> = self.targets.iter().map(|y| y + t).collect();
        let (mut e_lo, mut e_hi) = (lower[k - 1].max(0.0), upper[k - 1]);
        let w = self.volume;
        // dF/dE = ln(x_last / w): the last increment decides the direction.
        let last_ratio = |e: f64| {
            let g = taut_string(&lower, &upper, e);
            (g[k] - g[k - 1]) / w
        };
        if last_ratio(e_lo) >= 1.0 {
            e_hi = e_lo;
        } else if last_ratio(e_hi) <= 1.0 {
            e_lo = e_hi;
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (e_lo + e_hi);
                if mid <= e_lo || mid >= e_hi {
                    break;
                }
                if last_ratio(mid) > 1.0 {
                    e_hi = mid;
                } else {
                    e_lo = mid;
                }
            }
        }
        let g = taut_string(&lower, &upper, 0.5 * (e_lo + e_hi));
        g.windows(2).map(|p| (p[1] - p[0]).max(0.0)).collect()
    }

    /// General `d`: dual coordinate ascent. `Err(sweeps)` when undecided
    /// after the sweep cap.
    fn dual_ascent_feasible(
        &self,
        t: f64,
        level: f64,
        max_sweeps: usize,
    ) -> std::result::Result<Option<Vec<f64>>, usize> {
        let w = self.volume;
        let n = self.grid.num_cells();
        let lower: Vec<f64> = self.targets.iter().map(|y| y - t).collect();
        let upper: Vec<f64> = self.targets.iter().map(|y| y + t).collect();
        let mut mu = vec![0.0f64; self.targets.len()];
        let mut v = vec![0.0f64; n];
        let mut x = vec![w; n];
        let scale = self.targets.iter().fold(1.0f64, |m, y| m.max(y.abs()));
        let feas_tol = 1e-10 * scale;
        for _ in 0..max_sweeps {
            let mut violation = 0.0f64;
            for (j, members) in self.orthants.iter().enumerate() {
                let s: f64 = members.iter().map(|&c| x[c as usize]).sum();
                violation = violation.max(lower[j] - s).max(s - upper[j]);
                let delta = if s < lower[j] {
                    (lower[j] / s).ln()
                } else if s > upper[j] {
                    (upper[j] / s).ln()
                } else if mu[j] > 0.0 {
                    if lower[j] > 0.0 { (-mu[j]).max((lower[j] / s).ln()) } else { -mu[j] }
                } else if mu[j] < 0.0 {
                    (-mu[j]).min((upper[j] / s).ln())
                } else {
                    0.0
                };
                if delta != 0.0 {
                    mu[j] += delta;
                    for &c in members {
                        let c = c as usize;
                        v[c] += delta;
                        x[c] = w * v[c].exp();
                    }
                }
            }
            let primal = rate_of_masses(&x, w);
            let dual = -x.iter().map(|xi| xi - w).sum::<f64>()
                + mu.iter()
                    .zip(lower.iter().zip(&upper))
                    .map(|(&m, (&l, &u))| if m > 0.0 { m * l } else { m * u })
                    .sum::<f64>();
            if dual > level + 1e-12 {
                return Ok(None);
            }
            if violation <= feas_tol {
                if primal <= level {
                    return Ok(Some(x));
                }
                if primal - dual < 1e-10 {
                    return Ok(None);
                }
            }
        }
        Err(max_sweeps)
    }
}

/// Shortest path from `(0, 0)` to `(k, end)` through the tube
/// `lower[j-1] <= G_j <= upper[j-1]`, `0 < j < k`. Returns `G_0..=G_k`.
pub(crate) fn taut_string(lower: &[f64], upper: &[f64], end: f64) -> Vec<f64> {
    let k = lower.len();
    let bounds = |j: usize| if j == k { (end, end) } else { (lower[j - 1], upper[j - 1]) };
    let mut g = vec![0.0; k + 1];
    let (mut i0, mut v0) = (0usize, 0.0f64);
    while i0 < k {
        let mut max_slope = f64::INFINITY;
        let mut arg_max = i0;
        let mut min_slope = f64::NEG_INFINITY;
        let mut arg_min = i0;
        let mut vertex = None;
        for j in i0 + 1..=k {
            let (l, u) = bounds(j);
            let span = (j - i0) as f64;
            let (sl, su) = ((l - v0) / span, (u - v0) / span);
            if sl > max_slope {
                // bend upward on the upper boundary
                vertex = Some((arg_max, upper[arg_max - 1], max_slope));
                break;
            }
            if su < min_slope {
                // bend downward on the lower boundary
                vertex = Some((arg_min, lower[arg_min - 1], min_slope));
                break;
            }
            if su <= max_slope {
                max_slope = su;
                arg_max = j;
            }
            if sl >= min_slope {
                min_slope = sl;
                arg_min = j;
            }
        }
        let (j1, v1, slope) = match vertex {
            Some(vx) => vx,
            None => (k, end, (end - v0) / (k - i0) as f64),
        };
        for (step, gj) in g[i0 + 1..j1].iter_mut().enumerate() {
            *gj = v0 + slope * (step + 1) as f64;
        }
        g[j1] = v1;
        i0 = j1;
        v0 = v1;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chernoff::{h_root, Branch};
    use crate::rate::rate_ip;

    fn grid1(p: u32) -> DyadicGrid {
        DyadicGrid::new(1, p).unwrap()
    }

    #[test]
    fn taut_string_straight_when_unconstrained() {
        let g = taut_string(&[-10.0; 4], &[10.0; 4], 4.0);
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn taut_string_bends_over_lower_boundary() {
        // lower boundary lifts G_1 to 3, end at 4
        let g = taut_string(&[3.0, -10.0, -10.0, -10.0], &[10.0; 4], 4.0);
        assert_eq!(g[1], 3.0);
        for j in 2..=4 {
            assert!((g[j] - (3.0 + (j as f64 - 1.0) / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn taut_string_bends_under_upper_boundary() {
        let g = taut_string(&[-10.0; 4], &[0.5, 0.5, 10.0, 10.0], 4.0);
        assert_eq!(&g[..3], &[0.0, 0.25, 0.5]);
        assert!((g[3] - 2.25).abs() < 1e-12);
    }

    #[test]
    fn already_inside_is_zero() {
        let gf = GridFunction::identity(grid1(4));
        assert_eq!(dist_to_gamma(&gf, RateBudget::new(1.0).unwrap(), 1e-6).unwrap(), 0.0);
        let zero = GridFunction::zero(grid1(4));
        assert_eq!(dist_to_gamma(&zero, RateBudget::new(0.5).unwrap(), 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn zero_function_distance_is_lower_root() {
        let target = h_root(0.5, Branch::Lower).unwrap();
        for p in [1, 2, 6, 8] {
            let zero = GridFunction::zero(grid1(p));
            let d = dist_to_gamma(&zero, RateBudget::new(2.0).unwrap(), 1e-6).unwrap();
            assert!((d - target).abs() < 2e-6, "p={p}: {d}");
        }
    }

    #[test]
    fn witness_is_inside_and_close() {
        let grid = grid1(3);
        let gf = GridFunction::new(grid, vec![0.0, 0.5, 0.0, 0.0, 0.4, 0.0, 0.1, 0.0]).unwrap();
        let budget = RateBudget::new(3.0).unwrap();
        let pr = project_onto_gamma(&gf, budget, 1e-6, ProjectionOptions::default()).unwrap();
        assert!(rate_ip(&pr.nearest).to_f64() <= budget.level());
        assert!(sup_norm_dist(&gf, &pr.nearest).unwrap() <= pr.distance + 1e-9);
        assert!(pr.distance - pr.lower < 1e-6);
    }

    #[test]
    fn solvers_agree_in_one_dimension() {
        let grid = grid1(3);
        let gf = GridFunction::new(grid, vec![0.3, 0.0, 0.0, 0.2, 0.5, 0.0, 0.1, 0.0]).unwrap();
        let budget = RateBudget::new(2.5).unwrap();
        let taut = ProjectionOptions { solver: InnerSolver::TautString, ..Default::default() };
        let dual = ProjectionOptions { solver: InnerSolver::DualAscent, ..Default::default() };
        let a = project_onto_gamma(&gf, budget, 1e-6, taut).unwrap().distance;
        let b = project_onto_gamma(&gf, budget, 1e-6, dual).unwrap().distance;
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn two_dimensional_zero_function() {
        // Nearest element of Gamma_2 to zero in d = 2 is not a product, but the
        // distance is bracketed by the 1-D root (uniform slope M has sup-norm M).
        let grid = DyadicGrid::new(2, 2).unwrap();
        let zero = GridFunction::zero(grid);
        let pr = project_onto_gamma(&zero, RateBudget::new(2.0).unwrap(), 1e-5, ProjectionOptions::default()).unwrap();
        let m = h_root(0.5, Branch::Lower).unwrap();
        assert!(pr.distance <= m + 1e-5);
        assert!(rate_ip(&pr.nearest).to_f64() <= 0.5 + 1e-9);
        // every cumulative stays within the distance
        assert!(pr.nearest.total_mass() <= pr.distance + 1e-9);
    }

    #[test]
    fn ball_cost_around_linear_target() {
        // the cheapest element within eps of slope 2 is the slope 2 - eps line
        let h = |x: f64| crate::chernoff::chernoff_h(x).to_f64();
        for p in [1, 3, 6] {
            let target = GridFunction::uniform(grid1(p), 2.0).unwrap();
            let cost = min_rate_in_ball(&target, 0.1).unwrap();
            assert!((cost - h(1.9)).abs() < 1e-9, "p={p} cost={cost}");
        }
        let zero = GridFunction::zero(grid1(4));
        assert!((min_rate_in_ball(&zero, 0.3).unwrap() - h(0.3)).abs() < 1e-9);
        let id = GridFunction::identity(grid1(4));
        assert!(min_rate_in_ball(&id, 0.01).unwrap() < 1e-15);
    }

    #[test]
    fn tolerance_floor() {
        let gf = GridFunction::zero(grid1(2));
        assert!(dist_to_gamma(&gf, RateBudget::new(2.0).unwrap(), 1e-7).is_err());
    }

    #[test]
    fn sweep_cap_reports_bracket() {
        let gf = GridFunction::zero(DyadicGrid::new(2, 2).unwrap());
        let opts = ProjectionOptions { max_sweeps: 1, ..Default::default() };
        let err = project_onto_gamma(&gf, RateBudget::new(2.0).unwrap(), 1e-6, opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
