//! Goodness-of-fit tests, interval estimates and small regressions.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Poisson as PoissonDist, Discrete};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

/// Pearson test of observed counts against category probabilities. Adjacent categories are
/// merged until every expected count is at least five.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * total as f64;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    let stat = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    TestResult { statistic: stat, dof, p_value: chi_square_p(stat, dof) }
}

/// Tests integer samples against Poisson(`mean`).
pub fn poisson_gof(samples: &[u64], mean: f64) -> TestResult {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let top = max.max((mean + 10.0 * mean.sqrt() + 10.0) as usize);
    let mut observed = vec![0u64; top + 1];
    for &s in samples {
        observed[s as usize] += 1;
    }
    let d = PoissonDist::new(mean.max(1e-300)).unwrap();
    let mut probs: Vec<f64> = (0..=top as u64).map(|k| d.pmf(k)).collect();
    let head: f64 = probs[..top].iter().sum();
    probs[top] = (1.0 - head).max(0.0);
    chi_square_gof(&observed, &probs)
}

/// Two-sample chi-square test of homogeneity for histograms over the same categories.
/// Categories are merged left to right until the pooled count reaches ten.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> TestResult {
    let len = a.len().max(b.len());
    let get = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0) as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..len {
        x += get(a, i);
        y += get(b, i);
        if x + y >= 10.0 {
            bins.push((x, y));
            x = 0.0;
            y = 0.0;
        }
    }
    if x + y > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += x;
                last.1 += y;
            }
            None => bins.push((x, y)),
        }
    }
    let (na, nb): (f64, f64) = (bins.iter().map(|p| p.0).sum(), bins.iter().map(|p| p.1).sum());
    if na == 0.0 || nb == 0.0 {
        return TestResult { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let n = na + nb;
    let mut stat = 0.0;
    for &(x, y) in &bins {
        let c = x + y;
        let (ea, eb) = (c * na / n, c * nb / n);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = bins.len().saturating_sub(1);
    TestResult { statistic: stat, dof, p_value: chi_square_p(stat, dof) }
}

pub fn histogram(values: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut h = Vec::new();
    for v in values {
        let v = v as usize;
        if v >= h.len() {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}

/// One-sample Kolmogorov-Smirnov test against the uniform law on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> TestResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n);
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
    }
    TestResult { statistic: d, dof: s.len(), p_value: p.clamp(0.0, 1.0) }
}

/// Wilson score interval at `z` standard errors.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r_squared }
}

/// Decreasing logistic curve `p(x) = 1 / (1 + exp(s (x - m)))` fitted by maximum likelihood.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogisticFit {
    pub midpoint: f64,
    pub steepness: f64,
    pub midpoint_se: f64,
    pub converged: bool,
}

impl LogisticFit {
    pub fn band(&self, z: f64) -> (f64, f64) {
        (self.midpoint - z * self.midpoint_se, self.midpoint + z * self.midpoint_se)
    }
}

/// Fits `(x, successes, trials)` data with Newton iterations on `logit p = a + b x`.
pub fn logistic_fit(points: &[(f64, u64, u64)]) -> LogisticFit {
    let (mut a, mut b) = (0.0, -1.0);
    let xm = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    a -= b * xm;
    let mut converged = false;
    let mut info = [[0.0; 2]; 2];
    for _ in 0..200 {
        let (mut g0, mut g1) = (0.0, 0.0);
        info = [[0.0; 2]; 2];
        for &(x, k, n) in points {
            let p = 1.0 / (1.0 + (-(a + b * x)).exp());
            let r = k as f64 - n as f64 * p;
            g0 += r;
            g1 += r * x;
            let w = n as f64 * p * (1.0 - p);
            info[0][0] += w;
            info[0][1] += w * x;
            info[1][1] += w * x * x;
        }
        info[1][0] = info[0][1];
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        if !(det.abs() > 1e-300) {
            break;
        }
        let da = (info[1][1] * g0 - info[0][1] * g1) / det;
        let db = (-info[1][0] * g0 + info[0][0] * g1) / det;
        // damp huge steps on separable data
        let scale = (1.0f64).min(5.0 / (da.abs() + db.abs()).max(1e-300));
        a += scale * da;
        b += scale * db;
        if (da.abs() + db.abs()) < 1e-10 {
            converged = true;
            break;
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let (vaa, vab, vbb) = (info[1][1] / det, -info[0][1] / det, info[0][0] / det);
    let m = -a / b;
    // delta method for m = -a/b
    let (da, db) = (-1.0 / b, a / (b * b));
    let var = da * da * vaa + 2.0 * da * db * vab + db * db * vbb;
    LogisticFit { midpoint: m, steepness: -b, midpoint_se: var.max(0.0).sqrt(), converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn poisson_samples_pass_and_shifted_fail() {
        let mut rng = stream(4, 0);
        let d = Poisson::new(6.0).unwrap();
        let s: Vec<u64> = (0..10_000).map(|_| d.sample(&mut rng) as u64).collect();
        assert!(poisson_gof(&s, 6.0).p_value > 0.01);
        assert!(poisson_gof(&s, 6.3).p_value < 0.01);
    }

    #[test]
    fn two_sample_detects_difference() {
        let mut rng = stream(5, 0);
        let d1 = Poisson::new(4.0).unwrap();
        let d2 = Poisson::new(4.4).unwrap();
        let a = histogram((0..5000).map(|_| d1.sample(&mut rng) as u64));
        let b = histogram((0..5000).map(|_| d1.sample(&mut rng) as u64));
        let c = histogram((0..5000).map(|_| d2.sample(&mut rng) as u64));
        assert!(chi_square_two_sample(&a, &b).p_value > 0.01);
        assert!(chi_square_two_sample(&a, &c).p_value < 0.01);
    }

    #[test]
    fn ks_accepts_uniform() {
        let mut rng = stream(6, 0);
        let s: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        assert!(ks_uniform(&s).p_value > 0.01);
        let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&sq).p_value < 1e-6);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
    }

    #[test]
    fn logistic_recovers_midpoint() {
        let mut rng = stream(7, 0);
        let pts: Vec<(f64, u64, u64)> = (0..15)
            .map(|i| {
                let x = 0.2 * i as f64;
                let p = 1.0 / (1.0 + (4.0 * (x - 1.3)).exp());
                let k = (0..400).filter(|_| rng.random::<f64>() < p).count() as u64;
                (x, k, 400)
            })
            .collect();
        let f = logistic_fit(&pts);
        assert!(f.converged);
        assert!((f.midpoint - 1.3).abs() < 4.0 * f.midpoint_se, "{f:?}");
        assert!((f.steepness - 4.0).abs() < 1.0);
    }

    #[test]
    fn linear_fit_is_exact_on_a_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
