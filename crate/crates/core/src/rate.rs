//! The dyadic rate functional `I_p(g) = sum_i 2^-pd h(2^pd g(A_i))` and the
//! sublevel sets `Gamma_a = { I <= 1/a }`.
//!
//! For a grid function the piecewise-uniform extension (constant density on
//! each cell) has `I = I_p`, and by Jensen it minimises `I` among all
//! extensions with the same cell masses. Membership queries on grids are
//! therefore certificates for that extension.

use serde::{Deserialize, Serialize};

use crate::chernoff::{h_nonneg, ExtendedReal};
use crate::error::{Error, Result};
use crate::grid::{discretize, DyadicGrid, GridFunction};

/// Budget `a > 0` of the set `Gamma_a = { g : I(g) <= 1/a }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RateBudget(f64);

impl RateBudget {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("rate budget must be a finite a > 0, got {a}")));
        }
        Ok(RateBudget(a))
    }

    pub fn a(&self) -> f64 {
        self.0
    }

    /// The level `1/a` bounding the rate.
    pub fn level(&self) -> f64 {
        self.0.recip()
    }
}

impl TryFrom<f64> for RateBudget {
    type Error = Error;

    fn try_from(a: f64) -> Result<Self> {
        RateBudget::new(a)
    }
}

impl From<RateBudget> for f64 {
    fn from(b: RateBudget) -> f64 {
        b.0
    }
}

/// `I_p` of a grid function. Finite because masses are nonnegative.
pub fn rate_ip(gf: &GridFunction) -> ExtendedReal {
    ExtendedReal::Finite(rate_of_masses(gf.masses(), gf.grid().cell_volume()))
}

pub(crate) fn rate_of_masses(masses: &[f64], volume: f64) -> f64 {
    let inv = volume.recip();
    masses.iter().map(|&m| volume * h_nonneg(m * inv)).sum()
}

/// `I_p(discretize(g, p))` for `p = 1..=p_max`.
pub fn rate_i_sequence<F>(g_eval: F, d: usize, p_max: u32) -> Result<Vec<(u32, f64)>>
where
    F: Fn(&[f64]) -> f64,
{
    (1..=p_max)
        .map(|p| {
            let gf = discretize(&g_eval, DyadicGrid::new(d, p)?)?;
            Ok((p, rate_ip(&gf).to_f64()))
        })
        .collect()
}

/// Whether the piecewise-uniform extension of `gf` lies in `Gamma_a`.
pub fn gamma_contains(gf: &GridFunction, budget: RateBudget) -> bool {
    rate_ip(gf).to_f64() <= budget.level()
}
