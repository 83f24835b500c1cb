//! The Chernoff function `h(x) = x ln x - x + 1`, its Legendre duality with
//! the centered Poisson log-MGF `e^u - 1`, inversion of `h` on either side of
//! its minimum, and exact/bounded Poisson tails.
//!
//! `h` is the Cramér rate of a Poisson count normalised by its mean:
//! `P(X >= t) <= exp(-lambda * h(t / lambda))` for `t >= lambda`, and the
//! same bound holds for the lower tail when `t <= lambda`.

use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};

/// A value in `[-inf, +inf]` where only `+inf` is ever produced by the rate
/// functions of this crate. `+inf` absorbs under addition.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The value as an `f64`, with `+inf` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn scale(self, factor: f64) -> ExtendedReal {
        debug_assert!(factor >= 0.0);
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v * factor),
            ExtendedReal::PosInfinity => ExtendedReal::PosInfinity,
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInfinity,
        }
    }
}

impl std::iter::Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> ExtendedReal {
        iter.fold(ExtendedReal::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("inf"),
        }
    }
}

/// Which tail of a Poisson law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `P(X >= k)`
    Upper,
    /// `P(X <= k)`
    Lower,
}

/// Which preimage of `h` to return: `[0, 1]` or `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

/// Deviance term `x ln(x / m) + m - x = m * h(x / m)` for `x >= 0`, `m > 0`,
/// evaluated without cancellation when `x` is close to `m`.
pub(crate) fn deviance(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        return m;
    }
    if (x - m).abs() < 0.1 * (x + m) {
        // ln(x/m) = 2 atanh(v), expanded as an odd series in v.
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1;
        loop {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return s;
            }
            s = next;
            j += 1;
        }
    }
    x * (x / m).ln() + m - x
}

/// `h(x) = x ln x - x + 1` for `x > 0`, `h(0) = 1`, `h(x) = +inf` for `x < 0`.
pub fn chernoff_h(x: f64) -> ExtendedReal {
    if x.is_nan() {
        return ExtendedReal::Finite(f64::NAN);
    }
    if x < 0.0 || x == f64::INFINITY {
        ExtendedReal::PosInfinity
    } else {
        ExtendedReal::Finite(deviance(x, 1.0))
    }
}

/// Finite-valued `h` for arguments known to be nonnegative.
#[inline]
pub(crate) fn h_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    deviance(x, 1.0)
}

/// `log E[exp(u (X - 1))] + u = e^u - 1` for a unit-mean Poisson `X`.
pub fn poisson_log_mgf(u: f64) -> Result<f64> {
    let v = u.exp_m1();
    if v.is_infinite() {
        return Err(Error::Overflow(u));
    }
    Ok(v)
}

/// Numerically maximises `z u - (e^u - 1)` over `|u| <= search_bound` by
/// golden-section search and returns the maximum, which equals `h(z)`.
pub fn legendre_check(z: f64, search_bound: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("legendre_check needs z > 0, got {z}")));
    }
    let maximizer = z.ln();
    if !(search_bound > 0.0) || maximizer.abs() > search_bound {
        return Err(Error::BoundTooSmall { maximizer, bound: search_bound });
    }
    let objective = |u: f64| z * u - u.exp_m1();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-search_bound, search_bound);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-12 * (1.0 + a.abs().max(b.abs())) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    Ok(objective(0.5 * (a + b)))
}

/// Solves `h(M) = y` on the requested branch by bisection (absolute
/// tolerance below `1e-10` on `M`).
pub fn h_root(y: f64, branch: Branch) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("h_root needs y > 0, got {y}")));
    }
    let (mut lo, mut hi) = match branch {
        Branch::Lower => {
            if y > 1.0 {
                return Err(Error::Domain(format!(
                    "lower branch of h covers (0, 1] only, got y = {y}"
                )));
            }
            if y == 1.0 {
                return Ok(0.0);
            }
            (0.0, 1.0)
        }
        Branch::Upper => {
            let mut b = 2.0;
            while h_nonneg(b) <= y {
                b *= 2.0;
            }
            (1.0, b)
        }
    };
    // h is decreasing on [0, 1] and increasing on [1, inf).
    let above = |m: f64| h_nonneg(m) > y;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-13 {
            break;
        }
        let go_right = match branch {
            Branch::Lower => above(mid),
            Branch::Upper => !above(mid),
        };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln(n!) - (n + 1/2) ln n + n - ln(2 pi) / 2`.
fn stirling_error(n: u64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    if n <= 15 {
        let factorial: f64 = (1..=n).map(|i| i as f64).product();
        let nf = n as f64;
        return factorial.ln() - (nf + 0.5) * nf.ln() + nf - HALF_LN_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = (n as f64) * (n as f64);
    let nf = n as f64;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
}

/// `ln P(X = j)` for `X ~ Poisson(lambda)`, accurate to a few ulps relative
/// to the probability (saddle-point form).
pub(crate) fn poisson_ln_pmf(j: u64, lambda: f64) -> f64 {
    if j == 0 {
        return -lambda;
    }
    let jf = j as f64;
    -0.5 * (2.0 * std::f64::consts::PI * jf).ln() - stirling_error(j) - deviance(jf, lambda)
}

/// Exact Poisson tail by compensated summation of saddle-point pmf terms,
/// pivoted at the largest term.
pub fn poisson_tail_exact(lambda: f64, k: u64, side: Side) -> Result<f64> {
    if !(lambda > 0.0) || lambda > 1e4 {
        return Err(Error::OracleDomain(lambda));
    }
    let mode = lambda.floor() as u64;
    let spread = (40.0 * lambda.sqrt() + 60.0) as u64;
    // Terms more than `spread` away from both the mode and k are below 1e-300
    // of the largest retained term.
    let (from, to) = match side {
        Side::Upper => (k, k.max(mode) + spread),
        Side::Lower => (k.min(mode).saturating_sub(spread), k),
    };
    let logs: Vec<f64> = (from..=to).map(|j| poisson_ln_pmf(j, lambda)).collect();
    let pivot = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Neumaier compensated sum of exp(log - pivot).
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &l in &logs {
        let term = (l - pivot).exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(((sum + comp).ln() + pivot).exp().min(1.0))
}

/// Chernoff bound `exp(-lambda h(t / lambda))` on `P(X >= t)` (upper side,
/// `t >= lambda`) or `P(X <= t)` (lower side, `t <= lambda`).
pub fn poisson_chernoff_bound(lambda: f64, t: f64, side: Side) -> Result<f64> {
    if !(lambda > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need lambda > 0 and t >= 0, got ({lambda}, {t})")));
    }
    match side {
        Side::Upper if t < lambda => {
            return Err(Error::Domain(format!("upper-tail bound needs t >= lambda ({t} < {lambda})")))
        }
        Side::Lower if t > lambda => {
            return Err(Error::Domain(format!("lower-tail bound needs t <= lambda ({t} > {lambda})")))
        }
        _ => {}
    }
    Ok((-deviance(t, lambda)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> f64 {
        chernoff_h(x).to_f64()
    }

    #[test]
    fn h_closed_forms() {
        assert_eq!(h(1.0), 0.0);
        assert_eq!(h(0.0), 1.0);
        assert_eq!(chernoff_h(-1.0), ExtendedReal::PosInfinity);
        assert!((h(2.0) - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((h(0.5) - 0.153_426_409_720_027_35).abs() < 1e-15);
    }

    #[test]
    fn h_near_one_has_no_cancellation() {
        let x = 1.0 + 1e-6;
        let e = x - 1.0;
        // x ln x - x + 1 = e^2/2 - e^3/6 + e^4/12 - ... at x = 1 + e
        let expected = e * e / 2.0 - e * e * e / 6.0;
        assert!((h(x) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinity_absorbs() {
        let s = ExtendedReal::Finite(3.0) + ExtendedReal::PosInfinity;
        assert_eq!(s, ExtendedReal::PosInfinity);
        let total: ExtendedReal = [1.0, -1.0, 2.0].iter().map(|&x| chernoff_h(x)).sum();
        assert!(!total.is_finite());
    }

    #[test]
    fn log_mgf_values_and_overflow() {
        assert_eq!(poisson_log_mgf(0.0).unwrap(), 0.0);
        assert!((poisson_log_mgf(2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
        assert!((poisson_log_mgf(1.0).unwrap() - 1.718_281_828_459_045).abs() < 1e-15);
        assert!(matches!(poisson_log_mgf(710.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn legendre_matches_h() {
        assert!(legendre_check(1.0, 5.0).unwrap().abs() < 1e-12);
        assert!((legendre_check(0.5, 5.0).unwrap() - 0.153_426_409_7).abs() < 1e-9);
        assert!((legendre_check(2.0, 5.0).unwrap() - h(2.0)).abs() < 1e-6);
        assert!(matches!(legendre_check(50.0, 1.0), Err(Error::BoundTooSmall { .. })));
        assert!(legendre_check(0.0, 1.0).is_err());
    }

    #[test]
    fn h_root_examples() {
        assert_eq!(h_root(1.0, Branch::Lower).unwrap(), 0.0);
        // mpmath findroot on M ln M - M + 1/2
        assert!((h_root(0.5, Branch::Lower).unwrap() - 0.186_682_308_850_837).abs() < 1e-10);
        assert!((h_root(0.5, Branch::Upper).unwrap() - 2.155_535_203_500_502_5).abs() < 1e-10);
        assert!(h_root(0.0, Branch::Upper).is_err());
        assert!(h_root(-1.0, Branch::Lower).is_err());
        assert!(h_root(1.5, Branch::Lower).is_err());
    }

    #[test]
    fn poisson_tail_examples() {
        assert!((poisson_tail_exact(1.0, 0, Side::Upper).unwrap() - 1.0).abs() < 1e-15);
        let expected = 1.0 - 2.0 * (-1f64).exp();
        assert!((poisson_tail_exact(1.0, 2, Side::Upper).unwrap() - expected).abs() < 1e-14);
        // mpmath: 1 - sum_{j<20} e^-10 10^j / j!
        let p = poisson_tail_exact(10.0, 20, Side::Upper).unwrap();
        assert!((p - 0.003_454_341_975_856_807_7).abs() < 1e-14);
        assert!(p <= poisson_chernoff_bound(10.0, 20.0, Side::Upper).unwrap());
        assert!(poisson_tail_exact(2e4, 1, Side::Upper).is_err());
    }

    #[test]
    fn poisson_lower_tail_small_k() {
        // P(X <= 1) = e^-3 (1 + 3)
        let p = poisson_tail_exact(3.0, 1, Side::Lower).unwrap();
        assert!((p - 4.0 * (-3f64).exp()).abs() < 1e-15);
        let p = poisson_tail_exact(3.0, 0, Side::Lower).unwrap();
        assert!((p - (-3f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn chernoff_bound_examples() {
        assert_eq!(poisson_chernoff_bound(5.0, 5.0, Side::Upper).unwrap(), 1.0);
        let b = poisson_chernoff_bound(100.0, 200.0, Side::Upper).unwrap();
        assert!((b / 1.672_819_404_220_223_6e-17 - 1.0).abs() < 1e-12);
        let b = poisson_chernoff_bound(10.0, 20.0, Side::Upper).unwrap();
        assert!((b - 0.021_006_074_709_707_94).abs() < 1e-15);
        assert!(poisson_chernoff_bound(10.0, 5.0, Side::Upper).is_err());
        assert!(poisson_chernoff_bound(10.0, 15.0, Side::Lower).is_err());
    }
}
