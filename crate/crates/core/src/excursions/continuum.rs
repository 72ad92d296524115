//! Brownian excursions in the unit disk that hit a centered ball.

use crate::error::{invalid, Result};
use crate::excursions::poisson;
use crate::potential::continuum_capacity_ball;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct ContinuumExcursion {
    pub label: f64,
    /// Hitting point on `∂B(r)`.
    pub start: Complex64,
    /// Brownian motion from `start` until it leaves the disk; the last point is on the unit circle.
    pub forward: Vec<Complex64>,
    /// Conditioned path from `start` (pushed off by `sqrt(dt)`) to the unit circle; the excursion
    /// before its first visit to `∂B(r)` is this path reversed.
    pub backward: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct ContinuumCloud {
    pub u: f64,
    pub r: f64,
    pub dt: f64,
    pub excursions: Vec<ContinuumExcursion>,
}

#[inline]
pub fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a * sd, b * sd)
}

/// Point where the segment `a -> b` crosses the unit circle (`|a| < 1 <= |b|`).
pub fn exit_point(a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let (aa, ad, dd) = (a.norm_sqr(), a.re * d.re + a.im * d.im, d.norm_sqr());
    let t = (-ad + (ad * ad - dd * (aa - 1.0)).sqrt()) / dd;
    a + d * t.clamp(0.0, 1.0)
}

/// Brownian path from `z` until it leaves the unit disk.
pub fn brownian_to_circle<R: Rng + ?Sized>(z: Complex64, dt: f64, rng: &mut R) -> Vec<Complex64> {
    let sd = dt.sqrt();
    let mut path = vec![z];
    let mut z = z;
    loop {
        let next = z + gaussian_step(rng, sd);
        if next.norm_sqr() >= 1.0 {
            path.push(exit_point(z, next));
            return path;
        }
        path.push(next);
        z = next;
    }
}

/// Euler scheme for Brownian motion conditioned to leave the disk before hitting `B(r)`,
/// with drift capped at `1/sqrt(dt)` and radial reflection off `∂B(r)`.
pub fn conditioned_to_circle<R: Rng + ?Sized>(z: Complex64, r: f64, dt: f64, rng: &mut R) -> Vec<Complex64> {
    let sd = dt.sqrt();
    let cap = 1.0 / sd;
    let mut path = vec![z];
    let mut z = z;
    loop {
        let m = z.norm();
        let mut drift = z / (m * m * (m / r).ln());
        let dm = drift.norm();
        if dm > cap {
            drift *= cap / dm;
        }
        let mut next = z + drift * dt + gaussian_step(rng, sd);
        let nm = next.norm();
        if nm < r {
            next *= (2.0 * r - nm) / nm;
        }
        if next.norm_sqr() >= 1.0 {
            path.push(exit_point(z, next));
            return path;
        }
        path.push(next);
        z = next;
    }
}

/// Excursions at level `u` that hit `B(r)`: Poisson(`u cap(B(r))`) of them, each split at its
/// first hitting point, which is uniform on `∂B(r)`.
pub fn sample_continuum_cloud_ball<R: Rng + ?Sized>(u: f64, r: f64, dt: f64, rng: &mut R) -> Result<ContinuumCloud> {
    if !(u >= 0.0 && u.is_finite()) {
        return invalid(format!("intensity u={u} must be finite and nonnegative"));
    }
    let cap = continuum_capacity_ball(r)?;
    if !(dt > 0.0 && dt <= (1.0 - r).powi(2) / 100.0) {
        return invalid(format!("time step {dt} must lie in (0, (1-r)^2/100]"));
    }
    let count = poisson(u * cap, rng)?;
    let mut excursions = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let label = u * rng.random::<f64>();
        let theta = 2.0 * PI * rng.random::<f64>();
        let start = Complex64::from_polar(r, theta);
        let forward = brownian_to_circle(start, dt, rng);
        let pushed = Complex64::from_polar(r + dt.sqrt(), theta);
        let backward = conditioned_to_circle(pushed, r, dt, rng);
        excursions.push(ContinuumExcursion { label, start, forward, backward });
    }
    Ok(ContinuumCloud { u, r, dt, excursions })
}
