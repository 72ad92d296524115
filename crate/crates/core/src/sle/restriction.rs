//! Monte Carlo check of one-sided restriction for the cloud of Brownian
//! excursions from `R⁻` to `R⁻` in the upper half-plane.
//!
//! The hull `A = H ∩ B̄(x0, δ)` is avoided by the cloud at intensity `πα` with
//! probability `φ_A'(0)^α = (1 - δ²/x0²)^α`. Excursions that can reach `A` must first
//! cross the semicircle `C = {|z - x0| = ρ}` with `δ < ρ < x0`; the map
//! `z + ρ²/(z - x0) + ρ²/x0` sends the outside of `C` onto `H` and `C` onto `[a, b]`, where
//! the first crossing point has density proportional to `1/y`. From there the path is plain
//! Brownian motion, simulated by walk-on-spheres after moving to the unit disk with
//! `w ↦ (i - w)/(i + w)`.

use crate::error::{invalid, Result};
use crate::excursions::poisson;
use crate::rng::replicate;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

const SHELL: f64 = 1e-7;

fn to_disk(w: Complex64) -> Complex64 {
    let i = Complex64::i();
    (i - w) / (i + w)
}

/// Circle through three points.
fn circle_through(p: Complex64, q: Complex64, r: Complex64) -> (Complex64, f64) {
    let (ax, ay, bx, by, cx, cy) = (p.re, p.im, q.re, q.im, r.re, r.im);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let (a2, b2, c2) = (p.norm_sqr(), q.norm_sqr(), r.norm_sqr());
    let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    let c = Complex64::new(ux, uy);
    (c, (p - c).norm())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RestrictionReport {
    pub alpha: f64,
    pub x0: f64,
    pub delta: f64,
    pub reps: u64,
    pub avoided: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub p_exact: f64,
}

struct Geometry {
    x0: f64,
    rho: f64,
    a: f64,
    b: f64,
    hull_center: Complex64,
    hull_radius: f64,
}

impl Geometry {
    fn new(x0: f64, delta: f64) -> Self {
        let rho = 0.5 * (delta + x0);
        let (hull_center, hull_radius) = circle_through(
            to_disk(Complex64::new(x0 - delta, 0.0)),
            to_disk(Complex64::new(x0 + delta, 0.0)),
            to_disk(Complex64::new(x0, delta)),
        );
        Geometry { x0, rho, a: (x0 - rho).powi(2) / x0, b: (x0 + rho).powi(2) / x0, hull_center, hull_radius }
    }

    /// Point of `C` whose image under the slit-removing map is `y ∈ [a, b]`.
    fn crossing_point(&self, y: f64) -> Complex64 {
        let c = ((y - self.x0 - self.rho * self.rho / self.x0) / (2.0 * self.rho)).clamp(-1.0, 1.0);
        Complex64::new(self.x0, 0.0) + Complex64::from_polar(self.rho, c.acos())
    }

    fn hull_distance(&self, z: Complex64) -> f64 {
        (z - self.hull_center).norm() - self.hull_radius
    }
}

/// Walk-on-spheres from `z` in the unit disk; returns `(hit hull, exit point)`.
fn run<R: Rng + ?Sized>(g: &Geometry, mut z: Complex64, rng: &mut R) -> (bool, Complex64) {
    let mut hit = false;
    loop {
        let to_circle = 1.0 - z.norm();
        if to_circle <= SHELL {
            return (hit, z / z.norm());
        }
        let mut r = to_circle;
        if !hit {
            let dh = g.hull_distance(z);
            if dh <= SHELL {
                hit = true;
            } else {
                r = r.min(dh);
            }
        }
        z += Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>());
    }
}

/// Number of `R⁻ → R⁻` excursions hitting the hull in one cloud sample.
fn hits_in_cloud<R: Rng + ?Sized>(g: &Geometry, alpha: f64, rng: &mut R) -> Result<u64> {
    let count = poisson(alpha * (g.b / g.a).ln(), rng)?;
    let mut hits = 0;
    for _ in 0..count {
        let y = g.a * (g.b / g.a).powf(rng.random::<f64>());
        let start = to_disk(g.crossing_point(y));
        let (hit, exit) = run(g, start, rng);
        if hit && exit.im < 0.0 {
            hits += 1;
        }
    }
    Ok(hits)
}

pub fn restriction_check(alpha: f64, x0: f64, delta: f64, reps: usize, seed: u64) -> Result<RestrictionReport> {
    if !(alpha > 0.0) || !(0.0 < delta && delta < x0) {
        return invalid(format!("need alpha > 0 and 0 < delta < x0, got alpha={alpha} x0={x0} delta={delta}"));
    }
    let g = Geometry::new(x0, delta);
    let res = replicate(seed, reps, |_, rng| hits_in_cloud(&g, alpha, rng));
    let mut avoided = 0;
    for r in res {
        avoided += (r? == 0) as u64;
    }
    let p_hat = avoided as f64 / reps as f64;
    Ok(RestrictionReport {
        alpha,
        x0,
        delta,
        reps: reps as u64,
        avoided,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / reps as f64).sqrt(),
        p_exact: (1.0 - delta * delta / (x0 * x0)).powf(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crosscut_geometry() {
        let g = Geometry::new(1.0, 0.5);
        assert!((g.a - 0.0625).abs() < 1e-15 && (g.b - 3.0625).abs() < 1e-15);
        for y in [g.a, 1.0, 2.0, g.b] {
            let z = g.crossing_point(y);
            let image = z + g.rho * g.rho / (z - g.x0) + g.rho * g.rho / g.x0;
            assert!((image - y).norm() < 1e-12);
        }
        // the hull image contains the image of an interior point of A
        let inner = to_disk(Complex64::new(1.0, 0.2));
        assert!(g.hull_distance(inner) < 0.0);
        let outer = to_disk(Complex64::new(1.0, 0.7));
        assert!(g.hull_distance(outer) > 0.0);
    }

    #[test]
    fn lower_semicircle_is_negative_axis() {
        for x in [-5.0, -1.0, -0.01] {
            assert!(to_disk(Complex64::new(x, 0.0)).im < 0.0);
        }
        for x in [0.01, 1.0, 5.0] {
            assert!(to_disk(Complex64::new(x, 0.0)).im > 0.0);
        }
    }

    #[test]
    fn avoidance_matches_small_run() {
        let r = restriction_check(1.0, 1.0, 0.5, 2000, 77).unwrap();
        assert!((r.p_hat - r.p_exact).abs() < 4.0 * r.stderr.max(0.005), "{r:?}");
        assert!(restriction_check(1.0, 1.0, 1.5, 10, 0).is_err());
    }
}
