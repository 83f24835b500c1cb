//! Kernel density estimation with Erdős–Rényi bandwidths, and window
//! occupancy extremes.
//!
//! Kernels are anchored at the lower corner: the estimate at `z` looks at
//! the window `z + h_n^{1/d} [0,1)^d`, so with the uniform kernel
//! `f_n(z) = count(window) / (n h_n)`.

use serde::{Deserialize, Serialize};

use crate::increments::{edge_of, CenterLayout};
use crate::sampling::{DensityModel, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Indicator of `[0,1)^d`.
    Uniform,
    /// Product of `2 (1 - |2u - 1|)` on `[0,1]`.
    Triangular,
}

impl Kernel {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Kernel::Uniform => {
                if u.iter().all(|&x| (0.0..1.0).contains(&x)) {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Triangular => u
                .iter()
                .map(|&x| if (0.0..=1.0).contains(&x) { 2.0 * (1.0 - (2.0 * x - 1.0).abs()) } else { 0.0 })
                .product(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Uniform => "uniform",
            Kernel::Triangular => "triangular",
        }
    }
}

/// `(1 / (n h_n)) sum_i K((Z_i - z) / h_n^{1/d})`.
pub fn kde_estimate(points: &Sample, kernel: Kernel, z: &[f64], h_n: f64, n: u64) -> f64 {
    let d = z.len();
    let edge = edge_of(h_n, d);
    let mut buf = [0.0; 3];
    let mut total = 0.0;
    for x in points.candidates(z[0], z[0] + edge) {
        for k in 0..d {
            buf[k] = (x[k] - z[k]) / edge;
        }
        total += kernel.eval(&buf[..d]);
    }
    total / (n as f64 * h_n)
}

/// `|f_n(z) - f(z)|` at every center of the probe layout.
pub fn kde_errors(points: &Sample, kernel: Kernel, model: &DensityModel, probes: &CenterLayout, h_n: f64, n: u64) -> Vec<f64> {
    probes
        .centers()
        .map(|z| (kde_estimate(points, kernel, z, h_n, n) - model.density(z)).abs())
        .collect()
}

/// `max_z |f_n(z) - f(z)|` over the probe centers.
pub fn sup_error(points: &Sample, kernel: Kernel, model: &DensityModel, probes: &CenterLayout, h_n: f64, n: u64) -> f64 {
    kde_errors(points, kernel, model, probes, h_n, n).into_iter().fold(0.0, f64::max)
}

/// Normalised window occupancies `count / (f(z) n h_n)` summarised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyExtremes {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

pub fn window_count_extremes(points: &Sample, layout: &CenterLayout, model: &DensityModel, h_n: f64, n: u64) -> OccupancyExtremes {
    let d = layout.d;
    let edge = layout.edge;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for z in layout.centers() {
        let count = points
            .candidates(z[0], z[0] + edge)
            .filter(|x| (0..d).all(|k| x[k] >= z[k] && x[k] < z[k] + edge))
            .count();
        let ratio = count as f64 / (model.density(z) * n as f64 * h_n);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        sum += ratio;
    }
    OccupancyExtremes { min_ratio, max_ratio, mean_ratio: sum / layout.count() as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::{layout_with_edge, LayoutMode};

    #[test]
    fn kernels_integrate_to_one() {
        for kernel in [Kernel::Uniform, Kernel::Triangular] {
            let m = 2000;
            let s: f64 = (0..m).map(|i| kernel.eval(&[(i as f64 + 0.5) / m as f64])).sum::<f64>() / m as f64;
            assert!((s - 1.0).abs() < 1e-6, "{kernel:?}");
        }
        assert_eq!(Kernel::Uniform.eval(&[1.0]), 0.0);
        assert_eq!(Kernel::Triangular.eval(&[0.5, 0.5]), 4.0);
    }

    #[test]
    fn estimate_basics() {
        let empty = Sample::empty(1);
        assert_eq!(kde_estimate(&empty, Kernel::Uniform, &[0.3], 0.1, 100), 0.0);
        let one = Sample::from_points(1, vec![0.35]);
        assert!((kde_estimate(&one, Kernel::Uniform, &[0.3], 0.1, 100) - 1.0 / (100.0 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_sample_error_is_max_density() {
        let model = DensityModel::Uniform { d: 1 };
        let probes = layout_with_edge(&[(0.1, 0.9)], &model, 0.1, LayoutMode::Packing).unwrap();
        assert_eq!(sup_error(&Sample::empty(1), Kernel::Uniform, &model, &probes, 0.1, 50), 1.0);
    }

    #[test]
    fn evenly_filled_windows_have_small_error() {
        // each probe window holds exactly ceil(n h) points
        let model = DensityModel::Uniform { d: 1 };
        let (n, h) = (1000u64, 0.0123);
        let probes = layout_with_edge(&[(0.1, 0.9)], &model, h, LayoutMode::Packing).unwrap();
        let per = (n as f64 * h).ceil() as usize;
        let mut coords = Vec::new();
        for z in probes.centers() {
            for j in 0..per {
                coords.push(z[0] + h * (j as f64 + 0.5) / per as f64);
            }
        }
        let mut pts = Sample::from_points(1, coords);
        pts.sort_by_first();
        let err = sup_error(&pts, Kernel::Uniform, &model, &probes, h, n);
        assert!(err <= 1.0 / (n as f64 * h) + 1e-12);
        let ext = window_count_extremes(&pts, &probes, &model, h, n);
        assert_eq!(ext.min_ratio, ext.max_ratio);
    }

    #[test]
    fn extremes_with_empty_window() {
        let model = DensityModel::Uniform { d: 1 };
        let probes = layout_with_edge(&[(0.1, 0.5)], &model, 0.1, LayoutMode::Packing).unwrap();
        let pts = Sample::from_points(1, vec![0.15, 0.25, 0.35]);
        let ext = window_count_extremes(&pts, &probes, &model, 0.1, 10);
        assert_eq!(ext.min_ratio, 0.0);
        assert_eq!(ext.max_ratio, 1.0);
        assert!((ext.mean_ratio - 0.75).abs() < 1e-15);
    }
}
