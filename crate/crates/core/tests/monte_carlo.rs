use limitlaw::increments::{poissonized_window_increment, Window};
use limitlaw::kde::{kde_estimate, window_count_extremes, Kernel};
use limitlaw::increments::{center_layout, LayoutMode};
use limitlaw::sampling::{BandwidthSchedule, DensityModel, SeedSpec};

fn uniform() -> DensityModel {
    DensityModel::Uniform { d: 1 }
}

#[test]
fn poissonized_increment_has_mean_s() {
    let model = DensityModel::Tilted { d: 1 };
    let schedule = BandwidthSchedule::new(1.0).unwrap();
    let window = Window::new(&model, vec![0.3], 4096, &schedule).unwrap();
    let seeds = SeedSpec::new(101);
    let reps = 40_000;
    let p = 2;
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    for r in 0..reps {
        let inc = poissonized_window_increment(&model, &window, &mut seeds.stream(r, 0)).unwrap();
        let corners = inc.to_grid(p).unwrap().corner_values_1d();
        for (j, v) in corners.iter().enumerate() {
            sums[j] += v;
            sq[j] += v * v;
        }
    }
    // the tilted density is not flat over the window, so E Delta(s) = P(window part) n / (c f(z) log n)
    let edge = window.edge();
    let norm = window.normalization();
    for j in 1..=4 {
        let s = j as f64 / 4.0;
        let expected = 4096.0 * model.window_probability(&[0.3], edge * s) / norm;
        let mean = sums[j] / reps as f64;
        let var = sq[j] / reps as f64 - mean * mean;
        let se = (var / reps as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * se, "s={s} mean={mean} expected={expected} se={se}");
    }
}

#[test]
fn disjoint_cells_are_uncorrelated() {
    let model = uniform();
    let schedule = BandwidthSchedule::new(1.0).unwrap();
    let window = Window::new(&model, vec![0.5], 10_000, &schedule).unwrap();
    let seeds = SeedSpec::new(202);
    let reps = 50_000;
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in 0..reps {
        let inc = poissonized_window_increment(&model, &window, &mut seeds.stream(r, 0)).unwrap();
        let c = inc.cell_counts(1).unwrap();
        let (a, b) = (c[0] as f64, c[1] as f64);
        s1 += a;
        s2 += b;
        s11 += a * a;
        s22 += b * b;
        s12 += a * b;
    }
    let n = reps as f64;
    let cov = s12 / n - (s1 / n) * (s2 / n);
    let corr = cov / ((s11 / n - (s1 / n).powi(2)) * (s22 / n - (s2 / n).powi(2))).sqrt();
    assert!(corr.abs() < 0.02, "corr={corr}");
}

#[test]
fn uniform_kernel_estimate_is_unbiased() {
    let model = uniform();
    let schedule = BandwidthSchedule::new(4.0).unwrap();
    let n = 100_000u64;
    let h_n = schedule.bandwidth(n).unwrap();
    let seeds = SeedSpec::new(303);
    let reps = 200;
    let values: Vec<f64> = (0..reps)
        .map(|r| {
            let mut pts = model.sample(n as usize, &mut seeds.stream(r, 0));
            pts.sort_by_first();
            kde_estimate(&pts, Kernel::Uniform, &[0.5], h_n, n)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean={mean} se={se}");
}

#[test]
fn occupancy_mean_concentrates_near_one() {
    let model = uniform();
    let schedule = BandwidthSchedule::new(2.0).unwrap();
    let n = 100_000u64;
    let h_n = schedule.bandwidth(n).unwrap();
    let layout = center_layout(&[(0.05, 0.95)], &model, &schedule, n, LayoutMode::Packing, 1.0).unwrap();
    let mut pts = model.sample(n as usize, &mut SeedSpec::new(404).stream(0, 0));
    pts.sort_by_first();
    let ext = window_count_extremes(&pts, &layout, &model, h_n, n);
    assert!(ext.min_ratio <= ext.mean_ratio && ext.mean_ratio <= ext.max_ratio);
    assert!((0.9..=1.1).contains(&ext.mean_ratio), "{ext:?}");
}

/// Exact probability that `|C(s) - beta s| < eps` at the corners of the
/// `p = 1` grid for a Poissonized window with mean count `L`.
fn exact_ball_probability(l: f64, beta: f64, eps: f64) -> f64 {
    let lam = l / 2.0;
    let max = (4.0 * l) as usize + 60;
    let mut pmf = vec![0.0; max];
    pmf[0] = (-lam).exp();
    for k in 1..max {
        pmf[k] = pmf[k - 1] * lam / k as f64;
    }
    let ok = |count: usize, s: f64| (count as f64 / l - beta * s).abs() < eps;
    let mut total = 0.0;
    for a in 0..max {
        if !ok(a, 0.5) {
            continue;
        }
        for b in 0..max - a {
            if ok(a + b, 1.0) {
                total += pmf[a] * pmf[b];
            }
        }
    }
    total
}

#[test]
fn ball_frequency_matches_exact_probability() {
    let model = uniform();
    let schedule = BandwidthSchedule::new(1.0).unwrap();
    let seeds = SeedSpec::new(505);
    for n in [256u64, 4096] {
        let window = Window::new(&model, vec![0.4], n, &schedule).unwrap();
        let exact = exact_ball_probability((n as f64).ln(), 2.0, 0.1);
        let reps = 100_000u64;
        let hits = (0..reps)
            .filter(|&r| {
                let inc = poissonized_window_increment(&model, &window, &mut seeds.stream(r, n)).unwrap();
                let c = inc.to_grid(1).unwrap().corner_values_1d();
                (c[1] - 1.0).abs() < 0.1 && (c[2] - 2.0).abs() < 0.1
            })
            .count() as f64;
        let phat = hits / reps as f64;
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!((phat - exact).abs() < 4.0 * se, "n={n} phat={phat} exact={exact}");
    }
}
