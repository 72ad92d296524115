use disklab::loopsoup::{sample_loop_soup, PeelOrder, PeelingPlan};
use disklab::potential::DirichletSolver;
use disklab::rng::{replicate, StreamRng};
use disklab::stats::{chi_square_two_sample, histogram};
use disklab::LatticeDisk;

#[test]
fn law_does_not_depend_on_the_peeling_order() {
    let l = LatticeDisk::new(3).unwrap();
    let summary = |order: PeelOrder, seed: u64| -> (Vec<u64>, Vec<u64>) {
        let plan = PeelingPlan::new(&l, order).unwrap();
        let soups = replicate(seed, 4000, |_, rng: &mut StreamRng| sample_loop_soup(&l, &plan, 0.7, rng).unwrap());
        let mut covered = histogram(soups.iter().map(|s| s.covered(&l).len() as u64));
        let mut lengths = histogram(soups.iter().flat_map(|s| s.loops.iter().map(|lp| (lp.len() as u64).min(30))));
        covered.resize(l.len() + 1, 0);
        lengths.resize(31, 0);
        (covered, lengths)
    };
    let (ca, la) = summary(PeelOrder::Hilbert, 1);
    let reversed: Vec<u32> = (0..l.len() as u32).rev().collect();
    let (cb, lb) = summary(PeelOrder::Custom(reversed), 2);
    let p1 = chi_square_two_sample(&ca, &cb).p_value;
    let p2 = chi_square_two_sample(&la, &lb).p_value;
    assert!(p1 > 0.001 && p2 > 0.001, "{p1} {p2}");
}

#[test]
fn total_mass_is_order_free() {
    let l = LatticeDisk::new(5).unwrap();
    let a = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap().total_mass();
    let b = PeelingPlan::new(&l, PeelOrder::RowMajor).unwrap().total_mass();
    assert!((a - b).abs() < 1e-10 * a.abs());
}

#[test]
fn vertex_is_missed_with_probability_one_over_green_to_the_lambda() {
    let l = LatticeDisk::new(4).unwrap();
    let lambda = 0.8;
    let plan = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap();
    let full = DirichletSolver::full(&l).unwrap();
    let reps = 20_000;
    let soups = replicate(9, reps, |_, rng: &mut StreamRng| sample_loop_soup(&l, &plan, lambda, rng).unwrap().covered(&l));
    // the first peeled vertex sees the whole domain, so its return probability gives the law
    let first = plan.order()[0];
    let r0 = plan.return_probability(0);
    let centre = l.index_of(0, 0).unwrap();
    for (v, want) in [
        (first, (1.0 - r0).powf(lambda)),
        (centre, (4.0 * full.green(centre, centre).unwrap()).powf(-lambda)),
    ] {
        let missed = soups.iter().filter(|c| !c.contains(v)).count() as f64 / reps as f64;
        let se = (want * (1.0 - want) / reps as f64).sqrt();
        assert!((missed - want).abs() < 4.0 * se, "vertex {v}: {missed} vs {want}");
    }
    assert!(((1.0 - r0) - 1.0 / (4.0 * full.green(first, first).unwrap())).abs() < 1e-12);
}
