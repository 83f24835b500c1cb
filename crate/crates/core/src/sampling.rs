//! Density models, reproducible random streams, Poisson variates, the
//! bandwidth schedule `h_n = c log n / n`, and the blocking subsequence
//! `n_k = floor(exp(k / log k))`.
//!
//! # Stream derivation
//!
//! Every random stream is a `Xoshiro256PlusPlus` generator seeded through
//! `seed_from_u64` (which expands the 64-bit seed with SplitMix64). The
//! 64-bit seed of the stream for `(replicate, center)` under master seed `m`
//! is
//!
//! ```text
//! mix(z):  z += 0x9E3779B97F4A7C15
//!          z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          z ^ (z >> 31)                      (wrapping u64 arithmetic)
//! seed  =  mix(m ^ mix((replicate << 32) | center))
//! ```
//!
//! `mix` is a bijection of `u64`, so distinct `(replicate, center)` pairs
//! with both components below `2^32` get distinct seeds. Labelled sub-seeds
//! (one per sample size, say) use `mix(m ^ mix(label ^ 0xD1B54A32D192ED03))`
//! as the new master. Uniform variates are `((x >> 12) + 0.5) * 2^-52` for a
//! raw output `x`, which lies strictly inside `(0, 1)`.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::chernoff::poisson_ln_pmf;
use crate::error::{Error, Result};

pub type Stream = Xoshiro256PlusPlus;

const LABEL_SALT: u64 = 0xD1B5_4A32_D192_ED03;

pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed plus the derivation rule documented at module level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec { master_seed }
    }

    /// Independent master for a labelled family of streams.
    pub fn labelled(&self, label: u64) -> SeedSpec {
        SeedSpec { master_seed: mix64(self.master_seed ^ mix64(label ^ LABEL_SALT)) }
    }

    pub fn derive(&self, replicate: u64, center: u64) -> u64 {
        assert!(replicate < 1 << 32 && center < 1 << 32, "stream indices must fit in 32 bits");
        mix64(self.master_seed ^ mix64((replicate << 32) | center))
    }

    pub fn stream(&self, replicate: u64, center: u64) -> Stream {
        Stream::seed_from_u64(self.derive(replicate, center))
    }
}

/// Uniform variate strictly inside `(0, 1)`.
#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Exact Poisson variate: sequential-search inversion below `lambda = 30`,
/// transformed rejection with squeeze (PTRS) above.
pub fn poisson_variate<R: RngCore + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    assert!(lambda >= 0.0 && lambda < 2f64.powi(31), "poisson mean out of range: {lambda}");
    if lambda == 0.0 {
        return 0;
    }
    if lambda < 30.0 {
        let u = uniform_open(rng);
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            let next = cdf + p;
            if next == cdf {
                // remaining mass below double resolution
                break;
            }
            cdf = next;
        }
        return k;
    }
    let slam = lambda.sqrt();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform_open(rng) - 0.5;
        let v = uniform_open(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= poisson_ln_pmf(k as u64, lambda) {
            return k as u64;
        }
    }
}

/// Product density on the open unit cube `O = (0,1)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityModel {
    /// `f = 1`.
    Uniform { d: usize },
    /// `f(s) = prod_k (1 + s_k) / 1.5`.
    Tilted { d: usize },
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match *self {
            DensityModel::Uniform { d } | DensityModel::Tilted { d } => d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityModel::Uniform { .. } => "uniform",
            DensityModel::Tilted { .. } => "tilted",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim()) {
            return Err(Error::Config(format!("model dimension {} not in 1..=3", self.dim())));
        }
        Ok(())
    }

    /// Per-axis open interval of the support box `O`.
    pub fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.support();
        x.iter().all(|&v| v > lo && v < hi)
    }

    /// Whether the closed box `[z, z + edge]` lies inside `O`.
    pub fn window_inside(&self, z: &[f64], edge: f64) -> bool {
        let (lo, hi) = self.support();
        z.iter().all(|&v| v > lo && v + edge < hi)
    }

    fn marginal_density(&self, s: f64) -> f64 {
        match self {
            DensityModel::Uniform { .. } => 1.0,
            DensityModel::Tilted { .. } => (1.0 + s) / 1.5,
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        x.iter().map(|&s| self.marginal_density(s)).product()
    }

    /// Per-coordinate CDF on `[0, 1]`.
    pub fn marginal_cdf(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            DensityModel::Uniform { .. } => s,
            DensityModel::Tilted { .. } => (s + 0.5 * s * s) / 1.5,
        }
    }

    pub fn marginal_quantile(&self, u: f64) -> f64 {
        match self {
            DensityModel::Uniform { .. } => u,
            // root of s^2/2 + s - 1.5u in [0, 1], cancellation-free form
            DensityModel::Tilted { .. } => 3.0 * u / (1.0 + (1.0 + 3.0 * u).sqrt()),
        }
    }

    /// `P(Z in z + edge * [0,1)^d)`.
    pub fn window_probability(&self, z: &[f64], edge: f64) -> f64 {
        z.iter().map(|&lo| self.marginal_cdf(lo + edge) - self.marginal_cdf(lo)).product()
    }

    /// `n` i.i.d. draws by per-coordinate inversion, flat `n * d` layout.
    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Sample {
        let d = self.dim();
        let coords = (0..n * d).map(|_| self.marginal_quantile(uniform_open(rng))).collect();
        Sample::from_points(d, coords)
    }

    /// One draw conditioned on the window `z + edge * [0,1)^d`, returned in
    /// window-relative coordinates `(Z - z) / edge`.
    pub fn sample_in_window<R: RngCore + ?Sized>(
        &self,
        z: &[f64],
        edge: f64,
        rng: &mut R,
        out: &mut [f64],
    ) {
        const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
        for (k, &lo) in z.iter().enumerate() {
            let r = match self {
                DensityModel::Uniform { .. } => uniform_open(rng),
                DensityModel::Tilted { .. } => {
                    let (a, b) = (self.marginal_cdf(lo), self.marginal_cdf(lo + edge));
                    let x = self.marginal_quantile(a + uniform_open(rng) * (b - a));
                    ((x - lo) / edge).clamp(0.0, BELOW_ONE)
                }
            };
            out[k] = r;
        }
    }
}

/// Points in `R^d`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    d: usize,
    coords: Vec<f64>,
    sorted_first: bool,
}

impl Sample {
    pub fn empty(d: usize) -> Self {
        Sample { d, coords: Vec::new(), sorted_first: true }
    }

    pub fn from_points(d: usize, coords: Vec<f64>) -> Self {
        assert!(d > 0 && coords.len().is_multiple_of(d), "flat coordinates must hold whole points");
        Sample { d, coords, sorted_first: false }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.d)
    }

    /// Sorts points by first coordinate so window lookups can binary-search
    /// that axis.
    pub fn sort_by_first(&mut self) {
        if self.d == 1 {
            self.coords.sort_by(f64::total_cmp);
        } else {
            let d = self.d;
            let mut pts: Vec<&[f64]> = self.coords.chunks_exact(d).collect();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
            self.coords = pts.concat();
        }
        self.sorted_first = true;
    }

    pub fn is_sorted_by_first(&self) -> bool {
        self.sorted_first
    }

    /// Points whose first coordinate lies in `[lo, hi)`, a superset filter
    /// for window membership. Binary search when sorted, full scan otherwise.
    pub fn candidates(&self, lo: f64, hi: f64) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        if self.sorted_first {
            let n = self.len();
            let first = |i: usize| self.coords[i * self.d];
            let start = partition_point(n, |i| first(i) < lo);
            let end = partition_point(n, |i| first(i) < hi);
            Box::new(self.coords[start * self.d..end * self.d].chunks_exact(self.d))
        } else {
            Box::new(self.points().filter(move |x| x[0] >= lo && x[0] < hi))
        }
    }
}

fn partition_point(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `h_n = c log n / n` for `n >= n_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    c: f64,
    n_min: u64,
}

impl BandwidthSchedule {
    /// Schedule starting at the smallest `n >= 3` with `c log n / n < 1`.
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Config(format!("bandwidth constant must be positive, got {c}")));
        }
        let mut n = 3u64;
        while c * (n as f64).ln() / n as f64 >= 1.0 {
            n += 1;
        }
        Ok(BandwidthSchedule { c, n_min: n })
    }

    pub fn with_n_min(c: f64, n_min: u64) -> Result<Self> {
        let s = BandwidthSchedule::new(c)?;
        if n_min < 3 {
            return Err(Error::Config(format!("n_min must be >= 3, got {n_min}")));
        }
        if n_min < s.n_min {
            return Err(Error::Config(format!(
                "h_n = c log n / n is not below 1 at n_min = {n_min} (c = {c})"
            )));
        }
        Ok(BandwidthSchedule { c, n_min })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    pub fn bandwidth(&self, n: u64) -> Result<f64> {
        if n < self.n_min {
            return Err(Error::Domain(format!("n = {n} is below n_min = {}", self.n_min)));
        }
        Ok(self.c * (n as f64).ln() / n as f64)
    }
}

/// One block `N_k = {n_{k-1} + 1, ..., n_k}` of the blocking subsequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub k: u64,
    pub n_k: u64,
    pub members: std::ops::RangeInclusive<u64>,
}

pub fn blocking_index(k: u64) -> Option<u64> {
    let kf = k as f64;
    let v = (kf / kf.ln()).exp().floor();
    (v.is_finite() && v <= (1u64 << 31) as f64).then_some(v as u64)
}

/// Blocks for `k_min..=k_max`, stopping at the last `k` with
/// `n_k <= 2^31`. `n_k` increases for `k >= 3`; the block of `k_min` starts
/// at `n_{k_min - 1} + 1` when `k_min >= 4` and is `{n_3}` for `k_min = 3`.
pub fn blocking_subsequence(k_min: u64, k_max: u64) -> Result<Vec<Block>> {
    if k_min < 3 {
        return Err(Error::Domain(format!("k_min must be >= 3, got {k_min}")));
    }
    let mut out = Vec::new();
    let mut prev = if k_min >= 4 { blocking_index(k_min - 1) } else { None };
    for k in k_min..=k_max {
        let Some(n_k) = blocking_index(k) else { break };
        let start = prev.map_or(n_k, |p| p + 1);
        out.push(Block { k, n_k, members: start..=n_k });
        prev = Some(n_k);
    }
    Ok(out)
}
