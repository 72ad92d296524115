use disklab::excursions::{sample_cloud_direct, sample_cloud_single_walk, sample_hitting, SampleOptions};
use disklab::gff::{exploration_martingale, GffSampler};
use disklab::potential::equilibrium_measure;
use disklab::rng::{replicate, StreamRng};
use disklab::stats::{chi_square_two_sample, histogram, mean_and_variance, poisson_gof};
use disklab::LatticeDisk;
use std::f64::consts::PI;

fn quadrant(l: &LatticeDisk, v: u32) -> usize {
    let (x, y) = l.point(v);
    (((y.atan2(x) + PI) / (PI / 2.0)) as usize).min(3)
}

#[test]
fn direct_and_single_walk_clouds_have_the_same_occupied_law() {
    let l = LatticeDisk::new(8).unwrap();
    let opts = SampleOptions::default();
    let sizes = |seed: u64, single: bool| -> Vec<u64> {
        let xs = replicate(seed, 3000, |_, rng: &mut StreamRng| {
            let c = if single {
                sample_cloud_single_walk(&l, 0.3, opts, rng).unwrap()
            } else {
                sample_cloud_direct(&l, 0.3, opts, rng).unwrap()
            };
            (c.occupied.len() as u64 / 10).min(19)
        });
        let mut h = histogram(xs);
        h.resize(20, 0);
        h
    };
    let p = chi_square_two_sample(&sizes(1, false), &sizes(2, true)).p_value;
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn entry_and_exit_quadrants_are_exchangeable() {
    let l = LatticeDisk::new(6).unwrap();
    let opts = SampleOptions::default();
    let cells = |seed: u64, swap: bool| -> Vec<u64> {
        let mut h = vec![0u64; 16];
        for c in replicate(seed, 2000, |_, rng: &mut StreamRng| sample_cloud_direct(&l, 0.5, opts, rng).unwrap()) {
            for e in &c.excursions {
                let a = quadrant(&l, e.entry.unwrap().0);
                let b = quadrant(&l, e.exit.0);
                h[if swap { b * 4 + a } else { a * 4 + b }] += 1;
            }
        }
        h
    };
    let p = chi_square_two_sample(&cells(3, false), &cells(4, true)).p_value;
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn hitting_counts_are_poisson_with_mean_u_cap() {
    let l = LatticeDisk::new(12).unwrap();
    let k = l.ball_vertices((0.1, -0.2), 0.25).unwrap();
    let eq = equilibrium_measure(&l, &k).unwrap();
    let u = 0.7;
    let counts = replicate(5, 4000, |_, rng: &mut StreamRng| sample_hitting(&l, u, &eq, SampleOptions::default(), rng).unwrap().count() as u64);
    let p = poisson_gof(&counts, u * eq.capacity).p_value;
    assert!(p > 0.001, "p = {p}");
    // the direct cloud sees K through the same number of excursions
    let direct = replicate(6, 4000, |_, rng: &mut StreamRng| {
        let c = sample_cloud_direct(&l, u, SampleOptions { record_paths: true }, rng).unwrap();
        c.excursions.iter().filter(|e| e.path.as_ref().unwrap().iter().any(|&v| k.contains(v))).count() as u64
    });
    let p = poisson_gof(&direct, u * eq.capacity).p_value;
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn exploration_martingale_is_centered() {
    let l = LatticeDisk::new(10).unwrap();
    let k = l.ball_vertices((0.0, 0.0), 0.4).unwrap();
    let eq = equilibrium_measure(&l, &k).unwrap();
    let sampler = GffSampler::new(&l).unwrap();
    let reps = 5000;
    let ms = replicate(7, reps, |_, rng: &mut StreamRng| exploration_martingale(&eq, &sampler.sample(rng)));
    let (mean, var) = mean_and_variance(&ms);
    assert!(mean.abs() < 4.0 * (var / reps as f64).sqrt(), "mean {mean}, var {var}");
}
