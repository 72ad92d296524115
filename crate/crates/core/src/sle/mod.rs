//! Chordal `SLE_κ(ρ)` in the upper half-plane: the driving process, a zipper
//! solver for the trace, the boundary-approach statistic and a Monte Carlo
//! check of one-sided restriction for excursion clouds.

pub mod restriction;
pub mod zipper;

use crate::error::{invalid, Result};
use crate::rng::{replicate, StreamRng};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::Serialize;

pub use zipper::{recover_driving, trace_at, trace_points, half_plane_capacity};

fn check_kappa(kappa: f64) -> Result<()> {
    if !(8.0 / 3.0 - 1e-12..=4.0 + 1e-12).contains(&kappa) {
        return invalid(format!("kappa={kappa} must lie in [8/3, 4]"));
    }
    Ok(())
}

/// `ρ_κ(α)`, the force-point weight whose trace has one-sided restriction exponent `α`.
pub fn rho_kappa_alpha(kappa: f64, alpha: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(alpha > 0.0) {
        return invalid(format!("alpha={alpha} must be positive"));
    }
    Ok((-8.0 + kappa + (16.0 + kappa * (16.0 * alpha - 8.0) + kappa * kappa).sqrt()) / 2.0)
}

/// Dimension of the Bessel process `(W - V)/sqrt(κ)`.
pub fn bessel_dimension(kappa: f64, rho: f64) -> f64 {
    1.0 + 2.0 * (rho + 2.0) / kappa
}

/// Exponent at which the trace stops touching `(-∞, 0)`.
pub fn critical_alpha(kappa: f64) -> f64 {
    (8.0 - kappa) / 16.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Exact transition of the squared Bessel process (Poisson mixture of gammas).
    ExactSquaredBessel,
    /// Drift-implicit Euler step for the Bessel process; monotone in `ρ` under common noise.
    ImplicitEuler,
}

/// Driving function `W` and force point `V` at times `t_0 = 0 < t_1 < ...`, started from `W = 0`, `V = 0⁻`.
#[derive(Clone, Debug)]
pub struct Driving {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl Driving {
    pub fn steps(&self) -> usize {
        self.w.len() - 1
    }

    /// Length of step `k >= 1`.
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.t[k] - self.t[k - 1]
    }

    /// Deterministic driving function sampled on the uniform grid `k dt`.
    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> f64) -> Self {
        let t: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let w: Vec<f64> = t.iter().map(|&s| f(s)).collect();
        Driving { v: vec![0.0; w.len()], t, w }
    }
}

/// Samples `dW = sqrt(κ) dB - ρ dt/(V - W)`, `dV = 2 dt/(V - W)` through the Bessel process
/// `X = (W - V)/sqrt(κ)` of dimension `1 + 2(ρ+2)/κ`, on the uniform grid of step `dt`.
/// `V` follows the slit maps of the zipper exactly, so it is the discrete image of `0⁻`.
pub fn sample_driving<R: Rng + ?Sized>(kappa: f64, rho: f64, t_max: f64, dt: f64, scheme: Scheme, rng: &mut R) -> Result<Driving> {
    Ok(sample_driving_family(kappa, &[rho], t_max, dt, dt, scheme, rng)?.pop().unwrap())
}

/// Samples driving processes for several `ρ` on one shared time grid with shared noise.
///
/// Steps are refined below `dt` (down to `dt_min`) while some `W - V` is small, so that a
/// slit of height `2 sqrt(h)` never bridges the gap to the force point spuriously.
/// Under [`Scheme::ImplicitEuler`] the gaps `W - V` are ordered like `ρ` at every step.
pub fn sample_driving_family<R: Rng + ?Sized>(
    kappa: f64,
    rhos: &[f64],
    t_max: f64,
    dt: f64,
    dt_min: f64,
    scheme: Scheme,
    rng: &mut R,
) -> Result<Vec<Driving>> {
    if !(kappa > 0.0) {
        return invalid(format!("kappa={kappa} must be positive"));
    }
    if let Some(rho) = rhos.iter().find(|&&r| !(r > -2.0)) {
        return invalid(format!("rho={rho} must exceed -2"));
    }
    if !(dt > 0.0 && t_max >= dt && dt_min > 0.0 && dt_min <= dt) {
        return invalid("need 0 < dt_min <= dt <= T");
    }
    let m = rhos.len();
    let dims: Vec<f64> = rhos.iter().map(|&r| bessel_dimension(kappa, r)).collect();
    let sk = kappa.sqrt();
    let cap = ((t_max / dt).round() as usize + 1).min(1 << 22);
    let mut out: Vec<Driving> = (0..m)
        .map(|_| Driving { t: Vec::with_capacity(cap), w: Vec::with_capacity(cap), v: Vec::with_capacity(cap) })
        .collect();
    for d in &mut out {
        d.t.push(0.0);
        d.w.push(0.0);
        d.v.push(0.0);
    }
    let mut y = vec![0.0f64; m];
    let mut vv = vec![0.0f64; m];
    let mut t = 0.0;
    let end = t_max * (1.0 - 1e-12);
    while t < end {
        let ymin = y.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        // keep sqrt(κ) Y >= 8 sqrt(h)
        let mut h = (sk * ymin / 8.0).powi(2).clamp(dt_min, dt);
        if t + h > t_max {
            h = t_max - t;
        }
        let sh = h.sqrt();
        let z: f64 = StandardNormal.sample(rng);
        for i in 0..m {
            let y_next = match scheme {
                Scheme::ImplicitEuler => {
                    let c = (dims[i] - 1.0) / 2.0;
                    let a = y[i] + sh * z;
                    0.5 * (a + (a * a + 4.0 * c * h).sqrt())
                }
                Scheme::ExactSquaredBessel => {
                    let lam = y[i] * y[i] / h;
                    let k = if lam > 0.0 { Poisson::new(lam / 2.0).unwrap().sample(rng) } else { 0.0 };
                    let g = Gamma::new(dims[i] / 2.0 + k, 2.0).unwrap().sample(rng);
                    (h * g).sqrt()
                }
            };
            // Move V by the slit map of this step so that V stays the image of 0⁻: with gap
            // s = sqrt(κ) Y after the step, Δ solves Δ² + 2 s Δ + 4h = 0. The gap is kept just
            // above the slit footprint 2 sqrt(h), which only binds at the finest step.
            let floor = 2.0 * (1.0 + 1e-9) * sh / sk;
            let y_next = y_next.max(floor);
            let gap = sk * y_next;
            vv[i] -= 4.0 * h / (gap + (gap * gap - 4.0 * h).max(0.0).sqrt());
            y[i] = y_next;
            let d = &mut out[i];
            d.t.push(t + h);
            d.v.push(vv[i]);
            d.w.push(vv[i] + sk * y_next);
        }
        t += h;
    }
    Ok(out)
}

/// Parameters of the boundary-approach experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ApproachParams {
    pub t_max: f64,
    /// Coarse step, used while the force point is far from the driving function.
    pub dt: f64,
    /// Finest step of the adaptive grid.
    pub dt_min: f64,
    /// A trace point `z` counts as approaching the negative axis when `Re z < -δ` and `Im z < δ`.
    pub delta: f64,
    /// Trace points are examined at the deepest step of each run with `(W - V)/sqrt(t)` below this.
    pub gap_ratio: f64,
    pub scheme: Scheme,
}

impl Default for ApproachParams {
    fn default() -> Self {
        ApproachParams { t_max: 1.0, dt: 1e-3, dt_min: 1e-12, delta: 1e-4, gap_ratio: 1e-2, scheme: Scheme::ImplicitEuler }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ApproachSummary {
    pub alpha: f64,
    pub rho: f64,
    pub bessel_dimension: f64,
    pub approached: u64,
    pub reps: u64,
    pub fraction: f64,
    /// Fraction already approaching by time `T/2`; the gap to `fraction` shows the truncation effect.
    pub fraction_half_time: f64,
    /// Replicas approaching at this `α` but not at the previous one in the list.
    pub order_violations: u64,
}

/// Whether the trace comes within `δ` of `(-∞, -δ)`. The trace can only be close to the
/// negative axis while the force point is close to the driving function, so the tip is
/// computed at the local minima of the normalized gap.
pub fn approaches_negative_axis(d: &Driving, params: &ApproachParams) -> bool {
    first_approach(d, params).is_some()
}

/// Time of the first approach found by [`approaches_negative_axis`].
pub fn first_approach(d: &Driving, params: &ApproachParams) -> Option<f64> {
    let n = d.steps();
    let ratio = |k: usize| (d.w[k] - d.v[k]) / d.t[k].sqrt();
    let mut k = 1;
    while k <= n {
        if ratio(k) >= params.gap_ratio {
            k += 1;
            continue;
        }
        let mut best = k;
        while k <= n && ratio(k) < params.gap_ratio {
            if ratio(k) < ratio(best) {
                best = k;
            }
            k += 1;
        }
        let z = trace_at(d, best);
        if z.re < -params.delta && z.im < params.delta {
            return Some(d.t[best]);
        }
    }
    None
}

/// Fraction of traces approaching `(-∞, 0)` for each `α`. Within a replica all `α` share the
/// time grid and the driving noise.
pub fn boundary_hit_curve(kappa: f64, alphas: &[f64], params: ApproachParams, reps: usize, seed: u64) -> Result<Vec<ApproachSummary>> {
    let rhos: Vec<f64> = alphas.iter().map(|&a| rho_kappa_alpha(kappa, a)).collect::<Result<_>>()?;
    let rows = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<Vec<Option<f64>>> {
        let ds = sample_driving_family(kappa, &rhos, params.t_max, params.dt, params.dt_min, params.scheme, rng)?;
        Ok(ds.iter().map(|d| first_approach(d, &params)).collect())
    });
    let mut counts = vec![0u64; alphas.len()];
    let mut early = vec![0u64; alphas.len()];
    let mut violations = vec![0u64; alphas.len()];
    for row in rows {
        let row = row?;
        for i in 1..row.len() {
            violations[i] += (row[i].is_some() && row[i - 1].is_none()) as u64;
        }
        for ((c, e), hit) in counts.iter_mut().zip(early.iter_mut()).zip(row) {
            if let Some(t) = hit {
                *c += 1;
                *e += (t <= params.t_max / 2.0) as u64;
            }
        }
    }
    Ok(alphas
        .iter()
        .zip(&rhos)
        .zip(counts.into_iter().zip(early).zip(violations))
        .map(|((&alpha, &rho), ((approached, early), order_violations))| ApproachSummary {
            alpha,
            rho,
            bessel_dimension: bessel_dimension(kappa, rho),
            approached,
            reps: reps as u64,
            fraction: approached as f64 / reps as f64,
            fraction_half_time: early as f64 / reps as f64,
            order_violations,
        })
        .collect())
}

pub fn boundary_hit_statistic(kappa: f64, alpha: f64, params: ApproachParams, reps: usize, seed: u64) -> Result<ApproachSummary> {
    Ok(boundary_hit_curve(kappa, &[alpha], params, reps, seed)?[0])
}

/// Point of the trace at the end of the run.
pub fn tip(d: &Driving) -> Complex64 {
    trace_at(d, d.steps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn closed_form_exponents() {
        assert!((rho_kappa_alpha(8.0 / 3.0, 1.0 / 3.0).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!(rho_kappa_alpha(4.0, 0.25).unwrap().abs() < 1e-12);
        assert!((bessel_dimension(8.0 / 3.0, -2.0 / 3.0) - 2.0).abs() < 1e-12);
        assert!((critical_alpha(8.0 / 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(rho_kappa_alpha(5.0, 0.3).is_err());
        assert!(rho_kappa_alpha(3.0, 0.0).is_err());
    }

    #[test]
    fn force_point_moves_left_and_stays_behind() {
        let mut rng = stream(20, 0);
        for scheme in [Scheme::ImplicitEuler, Scheme::ExactSquaredBessel] {
            let d = sample_driving(3.0, -0.5, 1.0, 1e-3, scheme, &mut rng).unwrap();
            for k in 0..d.steps() {
                assert!(d.v[k + 1] <= d.v[k]);
                assert!(d.v[k] <= d.w[k]);
            }
        }
    }

    #[test]
    fn bessel_second_moment() {
        // E[(W-V)^2] = κ δ t
        let (kappa, rho) = (3.0, 0.2);
        let delta = bessel_dimension(kappa, rho);
        for scheme in [Scheme::ImplicitEuler, Scheme::ExactSquaredBessel] {
            let mut rng = stream(21, 0);
            let reps = 4000;
            let xs: Vec<f64> = (0..reps)
                .map(|_| {
                    let d = sample_driving(kappa, rho, 1.0, 1e-3, scheme, &mut rng).unwrap();
                    (d.w[d.steps()] - d.v[d.steps()]).powi(2)
                })
                .collect();
            let (m, var) = crate::stats::mean_and_variance(&xs);
            assert!((m - kappa * delta).abs() < 4.0 * (var / reps as f64).sqrt(), "{scheme:?} {m}");
        }
    }

    #[test]
    fn implicit_scheme_is_monotone_in_rho() {
        let lo = sample_driving(8.0 / 3.0, -1.0, 1.0, 1e-3, Scheme::ImplicitEuler, &mut stream(22, 0)).unwrap();
        let hi = sample_driving(8.0 / 3.0, -0.3, 1.0, 1e-3, Scheme::ImplicitEuler, &mut stream(22, 0)).unwrap();
        for k in 0..=lo.steps() {
            assert!(hi.w[k] - hi.v[k] >= lo.w[k] - lo.v[k]);
        }
    }

    #[test]
    fn force_point_is_the_image_of_the_origin() {
        // without contact the preimage of V stays at 0, up to rounding amplified near the base
        let rho = rho_kappa_alpha(8.0 / 3.0, 0.6).unwrap();
        let d = sample_driving_family(8.0 / 3.0, &[rho], 0.3, 1e-3, 1e-10, Scheme::ImplicitEuler, &mut stream(23, 0))
            .unwrap()
            .pop()
            .unwrap();
        for k in [1, d.steps() / 2, d.steps()] {
            assert!(zipper::force_point_preimage(&d, k).norm() < 1e-3);
        }
    }

    #[test]
    fn zero_rho_gives_brownian_driving() {
        let kappa = 3.0;
        let mut rng = stream(24, 0);
        let xs: Vec<f64> = (0..1000)
            .map(|_| *sample_driving(kappa, 0.0, 1.0, 1e-3, Scheme::ImplicitEuler, &mut rng).unwrap().w.last().unwrap())
            .collect();
        let (_, var) = crate::stats::mean_and_variance(&xs);
        // Var of the sample variance of a Gaussian is 2σ⁴/(n-1)
        assert!((var - kappa).abs() < 3.0 * kappa * (2.0f64 / 999.0).sqrt(), "{var}");
    }

    #[test]
    fn two_dimensional_bessel_rarely_nears_zero() {
        let frac = |dt: f64| {
            let mut rng = stream(25, 0);
            let hits = (0..400)
                .filter(|_| {
                    let d = sample_driving(8.0 / 3.0, -2.0 / 3.0, 0.1, dt, Scheme::ExactSquaredBessel, &mut rng).unwrap();
                    // D starts at 0, so look after an initial layer
                    (1..=d.steps()).any(|k| d.t[k] > 0.001 && d.w[k] - d.v[k] < dt.powf(0.4))
                })
                .count();
            hits as f64 / 400.0
        };
        let (coarse, fine) = (frac(1e-4), frac(1e-6));
        assert!(fine < coarse, "{coarse} {fine}");
    }

    #[test]
    fn force_point_mean_is_nonpositive() {
        let mut rng = stream(26, 0);
        let vs: Vec<f64> = (0..200)
            .map(|_| *sample_driving(8.0 / 3.0, -0.3, 1.0, 1e-3, Scheme::ImplicitEuler, &mut rng).unwrap().v.last().unwrap())
            .collect();
        assert!(vs.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn approach_dichotomy_small_sample() {
        let params = ApproachParams { t_max: 0.5, ..Default::default() };
        for scheme in [Scheme::ImplicitEuler, Scheme::ExactSquaredBessel] {
            let p = ApproachParams { scheme, ..params };
            let r = boundary_hit_curve(8.0 / 3.0, &[0.2, 0.6], p, 80, 27).unwrap();
            assert!(r[0].fraction > r[1].fraction + 0.4, "{scheme:?} {:?}", r);
            assert!(r[0].fraction_half_time <= r[0].fraction);
        }
    }
}
