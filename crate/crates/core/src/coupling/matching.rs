//! Matching a discrete excursion cloud hitting `B_n(r)` with a continuum one hitting `B(r)`.
//!
//! Counts are coupled through one uniform (Poisson quantiles with means `u cap`), entry points
//! by quantile coupling in angle (the continuum equilibrium measure of a ball is uniform on its
//! circle; the discrete one is ordered by angle), and each matched pair of forward paths by the
//! planar walk/Brownian coupling started from the two entry points.

use super::kmt_2d_from;
use crate::error::{invalid, Result};
use crate::lattice::LatticeDisk;
use crate::potential::{continuum_capacity_ball, equilibrium_measure};
use crate::rng::{replicate, StreamRng};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Smallest `k` with `P(N <= k) >= u` for `N ~ Poisson(mean)`.
pub fn poisson_quantile(mean: f64, u: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut p = (-mean).exp();
    let mut acc = p;
    let mut k = 0u64;
    while acc < u && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        acc += p;
    }
    k
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchRow {
    pub discrete_count: u64,
    pub continuum_count: u64,
    pub matched: u64,
    /// Largest sup distance over matched pairs of forward paths (0 when nothing matched).
    pub sup_distance: f64,
    /// Matched pairs where neither path left the disk within the simulated horizon.
    pub censored: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub n: u32,
    pub u: f64,
    pub r: f64,
    pub cap_discrete: f64,
    pub cap_continuum: f64,
    pub rows: Vec<MatchRow>,
    /// `(s, fraction of clouds with unmatched excursions or sup distance above s log(n)/n)`.
    pub exceedance: Vec<(f64, f64)>,
}

/// Couples `reps` pairs of clouds and reports the achieved distances.
pub fn excursion_match(n: u32, u: f64, r: f64, reps: usize, s_grid: &[f64], seed: u64) -> Result<MatchReport> {
    if !(u >= 0.0) {
        return invalid("u must be nonnegative");
    }
    if !(r > 0.0 && r < 1.0) {
        return invalid("r must lie in (0, 1)");
    }
    let lattice = LatticeDisk::new(n)?;
    let ball = lattice.ball_vertices((0.0, 0.0), r)?;
    let eq = equilibrium_measure(&lattice, &ball)?;
    let cap_c = continuum_capacity_ball(r)?;
    // discrete entry points ordered by angle in (-π, π]
    let mut entries: Vec<(f64, u32, f64)> = eq
        .support
        .iter()
        .map(|&(v, m)| {
            let (x, y) = lattice.point(v);
            (y.atan2(x), v, m)
        })
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for e in &entries {
        acc += e.2 / eq.capacity;
        cdf.push(acc);
    }
    let rows: Vec<MatchRow> = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<MatchRow> {
        let v: f64 = rng.random();
        let nd = poisson_quantile(u * eq.capacity, v);
        let nc = poisson_quantile(u * cap_c, v);
        let matched = nd.min(nc);
        let mut sup: f64 = 0.0;
        let mut censored = 0;
        for _ in 0..matched {
            let w: f64 = rng.random();
            let i = cdf.partition_point(|&c| c < w).min(entries.len() - 1);
            let (i0, j0) = lattice.coord(entries[i].1);
            let theta = 2.0 * PI * w - PI;
            let z = Complex64::from_polar(r * n as f64, theta);
            let pair = kmt_2d_from(n, (i0 as i64, j0 as i64), z, rng)?;
            match pair.sup_deviation() {
                Some(d) => sup = sup.max(d),
                None => censored += 1,
            }
        }
        Ok(MatchRow { discrete_count: nd, continuum_count: nc, matched, sup_distance: sup, censored })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let unit = (n as f64).ln() / n as f64;
    let exceedance = s_grid
        .iter()
        .map(|&s| {
            let bad = rows.iter().filter(|m| m.discrete_count != m.continuum_count || m.sup_distance > s * unit).count();
            (s, bad as f64 / rows.len().max(1) as f64)
        })
        .collect();
    Ok(MatchReport { n, u, r, cap_discrete: eq.capacity, cap_continuum: cap_c, rows, exceedance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_quantile_matches_cdf() {
        assert_eq!(poisson_quantile(2.0, 0.1), 0);
        // P(N <= 1) = 3 e^{-2} ≈ 0.406
        assert_eq!(poisson_quantile(2.0, 0.40), 1);
        assert_eq!(poisson_quantile(2.0, 0.41), 2);
        assert_eq!(poisson_quantile(0.0, 0.99), 0);
    }

    #[test]
    fn matched_clouds_are_close() {
        let rep = excursion_match(16, 0.3, 0.5, 40, &[1.0, 4.0, 16.0], 50).unwrap();
        assert!(rep.rows.iter().all(|m| m.matched == m.discrete_count.min(m.continuum_count)));
        assert!(rep.exceedance.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!((rep.cap_discrete - rep.cap_continuum).abs() / rep.cap_continuum < 0.2);
    }
}
