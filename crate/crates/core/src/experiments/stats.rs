//! Binomial intervals and log-log slope fits.

use serde::Serialize;

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn wilson(successes: u64, trials: u64) -> Proportion {
    assert!(trials > 0 && successes <= trials, "invalid binomial counts");
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let (mut lower, mut upper) = (center - half, center + half);
    if successes == 0 {
        lower = 0.0;
    }
    if successes == trials {
        upper = 1.0;
    }
    Proportion { successes, trials, estimate: phat, lower: lower.max(0.0), upper: upper.min(1.0) }
}

/// Unweighted least-squares line with residual diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; needs at least three points.
    pub slope_se: Option<f64>,
    pub residual_rms: f64,
    pub max_abs_residual: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    let k = x.len();
    if k < 2 {
        return None;
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_se = (k > 2).then(|| (sse / (kf - 2.0) / sxx).sqrt());
    Some(LineFit {
        slope,
        intercept,
        slope_se,
        residual_rms: (sse / kf).sqrt(),
        max_abs_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points: k,
    })
}

/// Median of a nonempty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
