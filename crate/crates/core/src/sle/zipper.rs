//! Loewner chains through compositions of vertical-slit maps.
//!
//! On each step `[t_{k-1}, t_k]` the driving function is frozen at `U_k = W_k`, so the
//! conformal map is `φ_k(z) = U_k + sqrt((z - U_k)^2 + 4 dt)` and its inverse grows a
//! vertical slit of height `2 sqrt(dt)` at `U_k`.

use super::Driving;
use num_complex::Complex64;

/// Square root in the closed upper half-plane; on the real line the sign follows `hint`.
#[inline]
fn sqrt_upper(z: Complex64, hint: f64) -> Complex64 {
    let s = z.sqrt();
    if s.im > 0.0 {
        s
    } else if s.im < 0.0 {
        -s
    } else if s.re == 0.0 || (s.re > 0.0) == (hint >= 0.0) {
        s
    } else {
        -s
    }
}

#[inline]
fn unzip_step(z: Complex64, u: f64, dt: f64) -> Complex64 {
    let w = z - u;
    u + sqrt_upper(w * w - 4.0 * dt, w.re)
}

#[inline]
fn zip_step(z: Complex64, u: f64, dt: f64) -> Complex64 {
    let w = z - u;
    u + sqrt_upper(w * w + 4.0 * dt, w.re)
}

/// Trace point `γ(t_k) = φ_1^{-1} ∘ ... ∘ φ_k^{-1}(U_k)`.
pub fn trace_at(d: &Driving, k: usize) -> Complex64 {
    if k == 0 {
        return Complex64::new(d.w[0], 0.0);
    }
    let mut z = Complex64::new(d.w[k], 2.0 * d.dt(k).sqrt());
    for j in (1..k).rev() {
        z = unzip_step(z, d.w[j], d.dt(j));
    }
    z
}

/// Preimage of the force point, `g_t^{-1}(V_t)` at step `k`: the leftmost point of the hull
/// on `(-∞, 0]`, or (up to the slit resolution) `0` while the hull has not touched `(-∞, 0)`.
pub fn force_point_preimage(d: &Driving, k: usize) -> Complex64 {
    let mut z = Complex64::new(d.v[k], 0.0);
    for j in (1..=k).rev() {
        let w = z - d.w[j];
        // real points left of the slit stay on the left
        z = d.w[j] + sqrt_upper(w * w - 4.0 * d.dt(j), w.re);
    }
    z
}

/// Trace points at steps `0, every, 2 every, ...` (and the last step).
pub fn trace_points(d: &Driving, every: usize) -> Vec<Complex64> {
    let n = d.steps();
    let mut ks: Vec<usize> = (0..=n).step_by(every.max(1)).collect();
    if *ks.last().unwrap() != n {
        ks.push(n);
    }
    ks.into_iter().map(|k| trace_at(d, k)).collect()
}

/// `g_t(z)` after the first `k` steps.
pub fn map_forward(d: &Driving, k: usize, mut z: Complex64) -> Complex64 {
    for j in 1..=k {
        z = zip_step(z, d.w[j], d.dt(j));
    }
    z
}

/// Half-plane capacity of the hull after `k` steps, read off `g(z) - z ~ hcap / z` at large `z`.
pub fn half_plane_capacity(d: &Driving, k: usize) -> f64 {
    let y = 1e4 * (1.0 + d.w[..=k].iter().fold(0.0f64, |m, w| m.max(w.abs())));
    let z = Complex64::new(0.0, y);
    // g(iy) - iy = hcap/(iy) + O(y^-2): take -y Im(g - z)
    let g = map_forward(d, k, z);
    -(g - z).im * y
}

/// Recovers driving values and time steps from trace points by unzipping them in order.
/// Returns `(U_k, dt_k)` for `k = 1..`.
pub fn recover_driving(trace: &[Complex64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<Complex64> = trace[1..].to_vec();
    let mut out = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let z = pts[k];
        let u = z.re;
        let dt = (z.im / 2.0).powi(2);
        out.push((u, dt));
        for p in pts.iter_mut().skip(k + 1) {
            *p = zip_step(*p, u, dt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sle::{sample_driving, Scheme};

    #[test]
    fn constant_driving_grows_a_vertical_segment() {
        let d = Driving::from_fn(1e-3, 1000, |_| 0.0);
        for (k, z) in trace_points(&d, 100).into_iter().enumerate() {
            let t = (k * 100) as f64 * 1e-3;
            assert!(z.re.abs() < 1e-12);
            assert!((z.im - 2.0 * t.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn brownian_scaling_is_exact() {
        let mut rng = stream(30, 0);
        let d = sample_driving(3.0, 0.0, 0.5, 1e-3, Scheme::ImplicitEuler, &mut rng).unwrap();
        let lam: f64 = 1.7;
        let scaled = Driving { t: d.t.iter().map(|t| t * lam * lam).collect(), w: d.w.iter().map(|w| w * lam).collect(), v: d.v.clone() };
        for k in [10, 200, 500] {
            let a = trace_at(&d, k) * lam;
            let b = trace_at(&scaled, k);
            assert!((a - b).norm() < 1e-9 * lam);
        }
    }

    #[test]
    fn capacity_grows_linearly() {
        let mut rng = stream(31, 0);
        let d = sample_driving(8.0 / 3.0, -0.5, 1.0, 1e-3, Scheme::ImplicitEuler, &mut rng).unwrap();
        for k in [100, 500, 1000] {
            let t = d.t[k];
            assert!((half_plane_capacity(&d, k) - 2.0 * t).abs() < 0.01 * 2.0 * t);
        }
    }

    #[test]
    fn unzipping_recovers_smooth_driving() {
        let d = Driving::from_fn(1e-3, 600, |t| (3.0 * t).sin());
        let trace: Vec<Complex64> = (0..=d.steps()).map(|k| trace_at(&d, k)).collect();
        for (k, (u, dt)) in recover_driving(&trace).into_iter().enumerate() {
            assert!((u - d.w[k + 1]).abs() < 1e-7, "step {k}");
            assert!((dt - d.dt(k + 1)).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_stays_in_upper_half_plane() {
        let mut rng = stream(32, 0);
        let d = sample_driving(8.0 / 3.0, -0.5, 1.0, 1e-3, Scheme::ImplicitEuler, &mut rng).unwrap();
        for z in trace_points(&d, 10).into_iter().skip(1) {
            assert!(z.im > 0.0);
        }
    }
}
