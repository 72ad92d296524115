//! Couplings of simple random walk with Brownian motion and the experiments built on them.
//!
//! The 1D coupling is the dyadic construction: the endpoint is matched by quantile coupling of
//! the binomial law with the Gaussian, and each interval is split at its midpoint by matching
//! the hypergeometric law of the up-steps in the first half with the Brownian bridge midpoint.
//! The planar coupling rotates the lattice by 45 degrees, where a simple random walk has two
//! independent 1D coordinates.

pub mod matching;

use crate::error::{invalid, Result};
use crate::lattice::{LatticeDisk, VertexSet};
use crate::potential::{capacity, continuum_capacity_ball, ContinuumSet};
use crate::rng::{replicate, DirectionSource, StreamRng};
use crate::stats::{ks_uniform, linear_fit, median, LinearFit, TestResult};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

pub use matching::{excursion_match, MatchReport, MatchRow};

/// Weights below this fraction of the modal weight are dropped from quantile tables.
const TAIL_CUTOFF: f64 = 1e-18;

/// `(Φ(z), 1 - Φ(z))` without cancellation in either tail.
fn normal_tails(z: f64) -> (f64, f64) {
    (0.5 * erfc(-z / SQRT_2), 0.5 * erfc(z / SQRT_2))
}

/// Smallest `k` in `lo..=hi` with `F(k) >= Φ(z)`, for the law with unnormalized weights
/// `w[k - lo]`. The upper tail is used for `z > 0` so both tails keep full precision.
fn quantile(lo: i64, w: &[f64], z: f64) -> i64 {
    let total: f64 = w.iter().sum();
    let (lower, upper) = normal_tails(z);
    if z <= 0.0 {
        let mut acc = 0.0;
        for (i, &x) in w.iter().enumerate() {
            acc += x / total;
            if acc >= lower {
                return lo + i as i64;
            }
        }
        lo + w.len() as i64 - 1
    } else {
        let mut tail = 0.0;
        let mut i = w.len() - 1;
        while i > 0 && tail + w[i] / total <= upper {
            tail += w[i] / total;
            i -= 1;
        }
        lo + i as i64
    }
}

/// Unnormalized weights of a unimodal law on `lo..=hi` from the ratio `p(k+1)/p(k)`,
/// built outward from `mode` and cut where they fall below [`TAIL_CUTOFF`].
fn weights_from_mode(lo: i64, hi: i64, mode: i64, ratio: impl Fn(i64) -> f64) -> (i64, Vec<f64>) {
    let mut up = vec![1.0];
    let mut k = mode;
    while k < hi {
        let next = up.last().unwrap() * ratio(k);
        if next < TAIL_CUTOFF {
            break;
        }
        up.push(next);
        k += 1;
    }
    let mut down = Vec::new();
    let mut k = mode;
    let mut cur = 1.0;
    while k > lo {
        cur /= ratio(k - 1);
        if cur < TAIL_CUTOFF {
            break;
        }
        down.push(cur);
        k -= 1;
    }
    let start = mode - down.len() as i64;
    down.reverse();
    down.extend(up);
    (start, down)
}

/// Number of successes in `trials` fair coin flips, at the quantile `Φ(z)`.
pub fn binomial_quantile(trials: u64, z: f64) -> u64 {
    let n = trials as i64;
    let (lo, w) = weights_from_mode(0, n, n / 2, |k| (n - k) as f64 / (k + 1) as f64);
    quantile(lo, &w, z) as u64
}

/// Successes among `draws` taken without replacement from `population` items of which
/// `marked` are marked, at the quantile `Φ(z)`.
pub fn hypergeometric_quantile(population: u64, marked: u64, draws: u64, z: f64) -> u64 {
    let (l, m, d) = (population as i64, marked as i64, draws as i64);
    let lo = (d - (l - m)).max(0);
    let hi = d.min(m);
    if lo == hi {
        return lo as u64;
    }
    let mode = (((d + 1) * (m + 1)) / (l + 2)).clamp(lo, hi);
    let ratio = |k: i64| ((m - k) * (d - k)) as f64 / ((k + 1) * (l - m - d + k + 1)) as f64;
    let (start, w) = weights_from_mode(lo, hi, mode, ratio);
    quantile(start, &w, z) as u64
}

/// A simple random walk and a standard Brownian motion on the integer clock.
#[derive(Clone, Debug)]
pub struct PairedPath {
    pub walk: Vec<i64>,
    pub bm: Vec<f64>,
}

impl PairedPath {
    pub fn horizon(&self) -> usize {
        self.walk.len() - 1
    }

    /// `max_k |B_k - Y_k|`. The walk is linear between integer times; the Brownian path is
    /// only sampled there.
    pub fn deviation(&self) -> f64 {
        self.walk.iter().zip(&self.bm).map(|(&y, &b)| (b - y as f64).abs()).fold(0.0, f64::max)
    }
}

/// Dyadic coupling of a simple random walk with a Brownian motion up to `horizon` steps.
pub fn dyadic_coupling_1d<R: Rng + ?Sized>(horizon: usize, rng: &mut R) -> Result<PairedPath> {
    if horizon < 2 {
        return invalid("horizon must be at least 2");
    }
    let n = horizon.next_power_of_two();
    let mut walk = vec![0i64; n + 1];
    let mut bm = vec![0.0f64; n + 1];
    let z: f64 = StandardNormal.sample(rng);
    bm[n] = (n as f64).sqrt() * z;
    walk[n] = 2 * binomial_quantile(n as u64, z) as i64 - n as i64;
    let mut len = n;
    while len >= 2 {
        let half = len / 2;
        for a in (0..n).step_by(len) {
            let (m, b) = (a + half, a + len);
            let z: f64 = StandardNormal.sample(rng);
            bm[m] = 0.5 * (bm[a] + bm[b]) + 0.5 * (len as f64).sqrt() * z;
            let ups = ((walk[b] - walk[a] + len as i64) / 2) as u64;
            let k = hypergeometric_quantile(len as u64, ups, half as u64, z) as i64;
            walk[m] = walk[a] + 2 * k - half as i64;
        }
        len = half;
    }
    walk.truncate(horizon + 1);
    bm.truncate(horizon + 1);
    Ok(PairedPath { walk, bm })
}

/// Skorokhod embedding on a time grid of step `dt`: the walk moves when the Brownian path
/// leaves `(Y - 1, Y + 1)`, and `Y_k` is compared with `B` at time `k`. Kept as a reference
/// for the much weaker `n^{1/4}` rate; the walk marginal is exact by symmetry.
pub fn skorokhod_coupling_1d<R: Rng + ?Sized>(horizon: usize, dt: f64, rng: &mut R) -> Result<PairedPath> {
    if horizon < 2 {
        return invalid("horizon must be at least 2");
    }
    if !(dt > 0.0 && dt <= 0.1) {
        return invalid("dt must lie in (0, 0.1]");
    }
    let per_unit = (1.0 / dt).round() as usize;
    let sd = dt.sqrt();
    let mut b = 0.0f64;
    let mut y = 0i64;
    let mut walk_at_embedding = vec![0i64];
    let mut bm = vec![0.0];
    let mut steps = 0usize;
    while bm.len() <= horizon || walk_at_embedding.len() <= horizon {
        let z: f64 = StandardNormal.sample(rng);
        b += sd * z;
        steps += 1;
        if (b - y as f64).abs() >= 1.0 {
            y += if b > y as f64 { 1 } else { -1 };
            walk_at_embedding.push(y);
        }
        if steps % per_unit == 0 {
            bm.push(b);
        }
    }
    walk_at_embedding.truncate(horizon + 1);
    bm.truncate(horizon + 1);
    Ok(PairedPath { walk: walk_at_embedding, bm })
}

/// A planar walk and a planar Brownian motion, both in units of the mesh `1/n`, on the clock
/// where one walk step takes time `1/(2n²)`. Both are stopped at the unit circle.
#[derive(Clone, Debug)]
pub struct PlanarPair {
    pub n: u32,
    pub walk: Vec<Complex64>,
    pub bm: Vec<Complex64>,
    /// First step with `|walk| >= 1`, if within the horizon.
    pub walk_exit: Option<usize>,
    /// First step with `|bm| >= 1`, if within the horizon.
    pub bm_exit: Option<usize>,
}

impl PlanarPair {
    /// Time of step `k` on the Brownian clock.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / (2.0 * self.n as f64 * self.n as f64)
    }

    /// Sup distance up to the first of the two exits, or `None` if neither exited.
    pub fn sup_deviation(&self) -> Option<f64> {
        let stop = match (self.walk_exit, self.bm_exit) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return None,
        };
        Some((0..=stop).map(|k| (self.walk[k] - self.bm[k]).norm()).fold(0.0, f64::max))
    }

    /// Last step at or before `stop` spent in the closed ball of radius `r`.
    fn last_in_ball(path: &[Complex64], stop: usize, r: f64) -> Option<usize> {
        (0..=stop).rev().find(|&k| path[k].norm() <= r + 1e-12)
    }
}

/// Number of steps simulated for the planar pair at mesh `1/n`.
pub fn planar_horizon(n: u32) -> usize {
    (8 * n as usize * n as usize).next_power_of_two()
}

/// Planar coupling started from the lattice point `walk_start` (integer coordinates) and the
/// point `bm_start` (in mesh units). Rotated coordinates `X1 + X2` and `X1 - X2` are two
/// independent 1D walks, each coupled to a standard Brownian motion `B1`, `B2`; the planar
/// Brownian motion is `((B1 + B2)/2, (B1 - B2)/2)`, which has the walk's covariance `I/2`.
pub fn kmt_2d_from<R: Rng + ?Sized>(n: u32, walk_start: (i64, i64), bm_start: Complex64, rng: &mut R) -> Result<PlanarPair> {
    if n < 2 {
        return invalid("n must be at least 2");
    }
    let h = planar_horizon(n);
    let u = dyadic_coupling_1d(h, rng)?;
    let v = dyadic_coupling_1d(h, rng)?;
    let scale = 1.0 / n as f64;
    let mut walk = Vec::with_capacity(h + 1);
    let mut bm = Vec::with_capacity(h + 1);
    let (mut walk_exit, mut bm_exit) = (None, None);
    for k in 0..=h {
        let x = Complex64::new(
            (walk_start.0 + (u.walk[k] + v.walk[k]) / 2) as f64,
            (walk_start.1 + (u.walk[k] - v.walk[k]) / 2) as f64,
        ) * scale;
        let z = (bm_start + Complex64::new(0.5 * (u.bm[k] + v.bm[k]), 0.5 * (u.bm[k] - v.bm[k]))) * scale;
        walk.push(x);
        bm.push(z);
        if walk_exit.is_none() && x.norm() >= 1.0 {
            walk_exit = Some(k);
        }
        if bm_exit.is_none() && z.norm() >= 1.0 {
            bm_exit = Some(k);
        }
        if walk_exit.is_some() && bm_exit.is_some() {
            break;
        }
    }
    Ok(PlanarPair { n, walk, bm, walk_exit, bm_exit })
}

/// Planar coupling with both paths started at the origin.
pub fn kmt_2d<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<PlanarPair> {
    kmt_2d_from(n, (0, 0), Complex64::new(0.0, 0.0), rng)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationRow {
    pub size: u64,
    pub median: f64,
    pub mean: f64,
    /// Paths without an exit inside the simulated horizon (planar runs only).
    pub censored: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<DeviationRow>,
    /// Median deviation against `log(size)` (1D) or medians times `n / log n` (planar).
    pub fit: LinearFit,
    /// Ratios of successive medians.
    pub ratios: Vec<f64>,
}

fn ratios(rows: &[DeviationRow]) -> Vec<f64> {
    rows.windows(2).map(|w| w[1].median / w[0].median).collect()
}

/// Deviation medians of the 1D coupling over several horizons, with an affine fit in `log`.
pub fn dyadic_scaling(horizons: &[usize], reps: usize, seed: u64) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for (i, &h) in horizons.iter().enumerate() {
        let devs: Vec<f64> = replicate(crate::rng::derive_seed(seed, i as u64), reps, |_, rng: &mut StreamRng| {
            dyadic_coupling_1d(h, rng).map(|p| p.deviation())
        })
        .into_iter()
        .collect::<Result<_>>()?;
        rows.push(summary_row(h as u64, &devs, 0));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.size as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.median).collect();
    Ok(ScalingReport { fit: linear_fit(&x, &y), ratios: ratios(&rows), rows })
}

fn summary_row(size: u64, devs: &[f64], censored: u64) -> DeviationRow {
    let mean = if devs.is_empty() { f64::NAN } else { devs.iter().sum::<f64>() / devs.len() as f64 };
    DeviationRow { size, median: if devs.is_empty() { f64::NAN } else { median(devs) }, mean, censored }
}

/// Sup-deviation medians of the planar coupling for several `n`. The fit regresses the
/// medians on `log(n)/n`.
pub fn planar_scaling(ns: &[u32], reps: usize, seed: u64) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let out: Vec<Option<f64>> = replicate(crate::rng::derive_seed(seed, 100 + i as u64), reps, |_, rng: &mut StreamRng| {
            kmt_2d(n, rng).map(|p| p.sup_deviation())
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let devs: Vec<f64> = out.iter().flatten().copied().collect();
        rows.push(summary_row(n as u64, &devs, (out.len() - devs.len()) as u64));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.size as f64).ln() / r.size as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.median).collect();
    Ok(ScalingReport { fit: linear_fit(&x, &y), ratios: ratios(&rows), rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct LastExitReport {
    pub r: f64,
    pub n: u32,
    /// `|X_L - Z_L|` per replica; replicas where either path did not exit are dropped.
    pub gaps: Vec<f64>,
    pub censored: u64,
    /// `(s, fraction of gaps above s log(n)/n)`.
    pub exceedance: Vec<(f64, f64)>,
    /// KS test of the Brownian last-exit angle against the uniform law.
    pub angle_test: TestResult,
}

/// Distance between the last exits from `B(r)` of the coupled walk and Brownian motion,
/// both started at the origin and stopped at the unit circle.
pub fn last_exit_gap(r: f64, n: u32, reps: usize, s_grid: &[f64], seed: u64) -> Result<LastExitReport> {
    if !(r > 0.5 && r < 1.0) {
        return invalid(format!("r={r} must lie in (1/2, 1)"));
    }
    let out: Vec<Option<(f64, f64)>> = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<Option<(f64, f64)>> {
        let p = kmt_2d(n, rng)?;
        let (Some(tw), Some(tb)) = (p.walk_exit, p.bm_exit) else { return Ok(None) };
        let lw = PlanarPair::last_in_ball(&p.walk, tw, r).unwrap();
        let lb = PlanarPair::last_in_ball(&p.bm, tb, r).unwrap();
        let angle = p.bm[lb].arg() / (2.0 * PI) + 0.5;
        Ok(Some(((p.walk[lw] - p.bm[lb]).norm(), angle)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = out.iter().flatten().copied().collect();
    let gaps: Vec<f64> = kept.iter().map(|g| g.0).collect();
    let angles: Vec<f64> = kept.iter().map(|g| g.1).collect();
    let unit = (n as f64).ln() / n as f64;
    let exceedance = s_grid
        .iter()
        .map(|&s| (s, gaps.iter().filter(|&&g| g > s * unit).count() as f64 / gaps.len().max(1) as f64))
        .collect();
    Ok(LastExitReport { r, n, censored: (out.len() - kept.len()) as u64, gaps, exceedance, angle_test: ks_uniform(&angles) })
}

#[derive(Clone, Debug, Serialize)]
pub struct BeurlingRow {
    /// Distance from the start to the segment, in lattice units.
    pub d: u32,
    pub escaped: u64,
    pub reps: u64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BeurlingReport {
    pub n: u32,
    pub radius: f64,
    pub rows: Vec<BeurlingRow>,
    /// Slope of `log p` against `log d` over the rows with `d > 0`.
    pub exponent: f64,
    pub fit: LinearFit,
}

/// Escape probabilities past a straight segment. The segment `A = {(k, 0): 0 <= k <= L}`
/// reaches beyond the escape circle, the walk starts at `(-d, 0)` and escapes when it gets
/// `radius * n` away from its start before touching `A`. Replica `k` uses the same stream
/// for every `d`.
pub fn beurling_check(n: u32, radius: f64, ds: &[u32], reps: usize, seed: u64) -> Result<BeurlingReport> {
    if !(radius > 0.0) {
        return invalid("radius must be positive");
    }
    let big_r = radius * n as f64;
    let len = (2.0 * big_r).ceil() as i64 + 1;
    let escapes = |d: i64, rng: &mut StreamRng| -> bool {
        let (mut x, mut y) = (-d, 0i64);
        let mut dirs = DirectionSource::new();
        loop {
            if y == 0 && (0..=len).contains(&x) {
                return false;
            }
            let (dx, dy) = ((x + d) as f64, y as f64);
            if dx * dx + dy * dy >= big_r * big_r {
                return true;
            }
            match dirs.next(rng) {
                0 => x += 1,
                1 => x -= 1,
                2 => y += 1,
                _ => y -= 1,
            }
        }
    };
    let hits: Vec<Vec<bool>> = replicate(seed, reps, |k, _: &mut StreamRng| {
        ds.iter()
            .map(|&d| {
                let mut rng = crate::rng::stream(seed, k as u64);
                escapes(d as i64, &mut rng)
            })
            .collect()
    });
    let rows: Vec<BeurlingRow> = ds
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let escaped = hits.iter().filter(|h| h[i]).count() as u64;
            BeurlingRow { d, escaped, reps: reps as u64, p: escaped as f64 / reps.max(1) as f64 }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.d > 0 && r.p > 0.0).map(|r| ((r.d as f64).ln(), r.p.ln())).collect();
    let fit = linear_fit(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(BeurlingReport { n, radius, exponent: fit.slope, fit, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityRow {
    pub set: String,
    pub n: u32,
    pub capacity: f64,
    /// Continuum capacity when known in closed form.
    pub reference: Option<f64>,
    pub error: Option<f64>,
}

/// Discrete capacities of `B(1/2)`, of the segment `[0.2, 0.8]`, and of the segment
/// `[0.2, 1 - n^{-1/2}]` that comes within `n^{-1/2}` of the boundary.
pub fn capacity_convergence(ns: &[u32]) -> Result<Vec<CapacityRow>> {
    let ball_ref = continuum_capacity_ball(0.5)?;
    let mut rows = Vec::new();
    for &n in ns {
        let l = LatticeDisk::new(n)?;
        let cases: [(String, ContinuumSet, Option<f64>); 3] = [
            ("ball(0.5)".into(), ContinuumSet::Ball { radius: 0.5 }, Some(ball_ref)),
            ("segment(0.2,0.8)".into(), ContinuumSet::Segment { a: 0.2, b: 0.8 }, None),
            ("deep-segment".into(), ContinuumSet::Segment { a: 0.2, b: 1.0 - (n as f64).powf(-0.5) }, None),
        ];
        for (name, set, reference) in cases {
            let k: VertexSet = set.discretize(&l)?;
            let c = capacity(&l, &k)?;
            rows.push(CapacityRow { set: name, n, capacity: c, reference, error: reference.map(|r| (c - r).abs()) });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{chi_square_gof, ks_uniform};
    use proptest::prelude::*;
    use statrs::distribution::{Binomial, DiscreteCDF, Hypergeometric};

    fn phi_inv(u: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::standard().inverse_cdf(u)
    }

    #[test]
    fn quantiles_match_library_cdfs() {
        let bin = Binomial::new(0.5, 40).unwrap();
        let hyp = Hypergeometric::new(64, 20, 32).unwrap();
        for i in 1..200 {
            let u = i as f64 / 200.0 + 1e-9;
            let z = phi_inv(u);
            let k = binomial_quantile(40, z);
            assert!(bin.cdf(k) >= u - 1e-12 && (k == 0 || bin.cdf(k - 1) < u + 1e-12), "u={u} k={k}");
            let k = hypergeometric_quantile(64, 20, 32, z);
            assert!(hyp.cdf(k) >= u - 1e-12 && (k == 0 || hyp.cdf(k - 1) < u + 1e-12), "u={u} k={k}");
        }
    }

    proptest! {
        #[test]
        fn hypergeometric_quantile_in_support(pop in 2u64..200, frac in 0.0f64..1.0, z in -9.0f64..9.0) {
            let marked = (frac * pop as f64) as u64;
            let draws = pop / 2;
            let k = hypergeometric_quantile(pop, marked, draws, z);
            prop_assert!(k <= marked.min(draws));
            prop_assert!(k + (pop - marked) >= draws);
        }

        #[test]
        fn walk_steps_are_unit(seed in 0u64..1000, h in 2usize..300) {
            let p = dyadic_coupling_1d(h, &mut stream(seed, 0)).unwrap();
            prop_assert_eq!(p.horizon(), h);
            prop_assert!(p.walk.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        }
    }

    #[test]
    fn horizon_two_is_monotone_quantile_coupling() {
        // the endpoint of the walk is a nondecreasing function of B_2
        let mut rng = stream(40, 0);
        let mut pairs: Vec<(f64, i64)> = (0..2000)
            .map(|_| {
                let p = dyadic_coupling_1d(2, &mut rng).unwrap();
                (p.bm[2], p.walk[2])
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        let counts = [-2, 0, 2].map(|v| pairs.iter().filter(|p| p.1 == v).count() as u64);
        assert!(chi_square_gof(&counts, &[0.25, 0.5, 0.25]).p_value > 1e-3);
    }

    #[test]
    fn marginals_are_exact() {
        let mut rng = stream(41, 0);
        let mut signs = [0u64; 2];
        let mut us = Vec::new();
        for _ in 0..300 {
            let p = dyadic_coupling_1d(64, &mut rng).unwrap();
            for w in p.walk.windows(2) {
                signs[(w[1] > w[0]) as usize] += 1;
            }
            for w in p.bm.windows(2).step_by(7) {
                us.push(normal_tails(w[1] - w[0]).0);
            }
        }
        assert!(chi_square_gof(&signs, &[0.5, 0.5]).p_value > 1e-3);
        assert!(ks_uniform(&us).p_value > 1e-3);
    }

    #[test]
    fn deviation_grows_slowly() {
        let r = dyadic_scaling(&[256, 4096], 200, 42).unwrap();
        assert!(r.rows[1].median < 2.5 * r.rows[0].median, "{:?}", r.rows);
        // a Skorokhod embedding is much worse at the same horizon
        let mut rng = stream(43, 0);
        let sk: Vec<f64> = (0..50).map(|_| skorokhod_coupling_1d(4096, 0.05, &mut rng).unwrap().deviation()).collect();
        assert!(median(&sk) > r.rows[1].median);
    }

    #[test]
    fn planar_pair_starts_together_and_stops_at_circle() {
        let p = kmt_2d(16, &mut stream(44, 0)).unwrap();
        assert_eq!(p.walk[0], p.bm[0]);
        let k = p.walk_exit.unwrap();
        assert!(p.walk[k].norm() >= 1.0 && p.walk[..k].iter().all(|z| z.norm() < 1.0));
        // lattice steps of size 1/n
        for w in p.walk.windows(2) {
            assert!(((w[1] - w[0]).norm() - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beurling_zero_distance_never_escapes() {
        let r = beurling_check(32, 0.3, &[0, 2, 8], 300, 45).unwrap();
        assert_eq!(r.rows[0].escaped, 0);
        assert!(r.rows[1].p <= r.rows[2].p);
    }
}
