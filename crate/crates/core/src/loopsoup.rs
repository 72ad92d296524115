//! Random-walk loop soups on `D_n`.
//!
//! The main sampler peels vertices one at a time: with `H_i = D_n ∖ {x_1, ..., x_{i-1}}`,
//! loops whose earliest vertex is `x_i` form a Poisson number of concatenations of
//! excursions from `x_i` to itself inside `H_i`. The return probabilities come from the
//! pivots of one LDL^T factorization taken in reverse peeling order.

use crate::error::{invalid, Result};
use crate::excursions::poisson;
use crate::lattice::{is_boundary_slot, LatticeDisk, VertexSet};
use crate::potential::DirichletSolver;
use crate::rng::DirectionSource;
use crate::unionfind::UnionFind;
use rand::Rng;

/// A closed walk `ℓ_0, ..., ℓ_{m-1}, ℓ_0`; `vertices[0]` is its base.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop {
    pub vertices: Vec<u32>,
}

impl Loop {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn base(&self) -> u32 {
        self.vertices[0]
    }
}

#[derive(Clone, Debug)]
pub struct LoopSoup {
    pub lambda: f64,
    pub loops: Vec<Loop>,
}

impl LoopSoup {
    pub fn empty(lambda: f64) -> Self {
        LoopSoup { lambda, loops: Vec::new() }
    }

    pub fn covered(&self, lattice: &LatticeDisk) -> VertexSet {
        VertexSet::from_iter(lattice, self.loops.iter().flat_map(|l| l.vertices.iter().copied()))
    }
}

#[derive(Clone, Debug)]
pub enum PeelOrder {
    Hilbert,
    RowMajor,
    Custom(Vec<u32>),
}

/// Peeling order together with the return probabilities `r_i = P_{x_i}(return to x_i inside H_i)`.
#[derive(Clone, Debug)]
pub struct PeelingPlan {
    order: Vec<u32>,
    rank: Vec<u32>,
    ret: Vec<f64>,
}

impl PeelingPlan {
    pub fn new(lattice: &LatticeDisk, order: PeelOrder) -> Result<Self> {
        let order = match order {
            PeelOrder::Hilbert => hilbert_order(lattice),
            PeelOrder::RowMajor => (0..lattice.len() as u32).collect(),
            PeelOrder::Custom(o) => {
                let set = VertexSet::from_iter(lattice, o.iter().copied());
                if o.len() != lattice.len() || set.len() != lattice.len() {
                    return invalid("peeling order must list every vertex once");
                }
                o
            }
        };
        let mut rank = vec![0u32; lattice.len()];
        for (i, &v) in order.iter().enumerate() {
            rank[v as usize] = i as u32;
        }
        let reversed: Vec<u32> = order.iter().rev().copied().collect();
        let solver = DirichletSolver::with_order(lattice, &reversed)?;
        let mut ret = vec![0.0; order.len()];
        for (v, d) in solver.pivots_by_vertex().expect("direct factorization") {
            ret[rank[v as usize] as usize] = 1.0 - d / 4.0;
        }
        Ok(PeelingPlan { order, rank, ret })
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Return probability of the `i`-th peeled vertex inside `H_i`.
    pub fn return_probability(&self, i: usize) -> f64 {
        self.ret[i]
    }

    /// Total loop mass `Σ_i log(1/(1-r_i)) = -log det(I - P)`.
    pub fn total_mass(&self) -> f64 {
        self.ret.iter().map(|r| -(1.0 - r).ln()).sum()
    }
}

fn hilbert_index(side_log: u32, mut x: u32, mut y: u32) -> u64 {
    let side = 1u32 << side_log;
    let mut d = 0u64;
    let mut s = side >> 1;
    while s > 0 {
        let rx = ((x & s) > 0) as u32;
        let ry = ((y & s) > 0) as u32;
        d += (s as u64) * (s as u64) * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = side - 1 - x;
                y = side - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s >>= 1;
    }
    d
}

/// Vertices sorted along a Hilbert curve through the bounding square.
pub fn hilbert_order(lattice: &LatticeDisk) -> Vec<u32> {
    let n = lattice.n() as i32;
    let side = (2 * n + 1) as u32;
    let side_log = (32 - (side - 1).leading_zeros()).max(1);
    let mut v: Vec<(u64, u32)> = (0..lattice.len() as u32)
        .map(|k| {
            let (i, j) = lattice.coord(k);
            (hilbert_index(side_log, (i + n) as u32, (j + n) as u32), k)
        })
        .collect();
    v.sort_unstable();
    v.into_iter().map(|p| p.1).collect()
}

/// `P(J = j) = r^j / (j log(1/(1-r)))`, by sequential inversion.
pub fn sample_log_series<R: Rng + ?Sized>(r: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut p = r / -(1.0 - r).ln();
    let mut cdf = p;
    let mut j = 1u64;
    while u > cdf && p > 0.0 {
        p *= r * j as f64 / (j + 1) as f64;
        j += 1;
        cdf += p;
    }
    j
}

/// Walk from `x` inside `H_i`; appends the visited vertices (starting with `x`) and reports
/// whether it came back to `x` before leaving `H_i`.
fn excursion_from<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    rank: &[u32],
    i: u32,
    x: u32,
    out: &mut Vec<u32>,
    rng: &mut R,
    dirs: &mut DirectionSource,
) -> bool {
    out.push(x);
    let mut v = x;
    loop {
        let s = lattice.neighbors(v)[dirs.next(rng)];
        if is_boundary_slot(s) || rank[s as usize] < i {
            return false;
        }
        if s == x {
            return true;
        }
        out.push(s);
        v = s;
    }
}

/// Loop soup of intensity `lambda > 0` by vertex peeling.
pub fn sample_loop_soup<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    plan: &PeelingPlan,
    lambda: f64,
    rng: &mut R,
) -> Result<LoopSoup> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("loop intensity {lambda} must be positive"));
    }
    if plan.order.len() != lattice.len() {
        return invalid("peeling plan belongs to a different lattice");
    }
    let mut dirs = DirectionSource::new();
    let mut loops = Vec::new();
    for (i, &x) in plan.order.iter().enumerate() {
        let r = plan.ret[i];
        if r <= 0.0 {
            continue;
        }
        let count = poisson(lambda * -(1.0 - r).ln(), rng)?;
        for _ in 0..count {
            let pieces = sample_log_series(r, rng);
            let mut vertices = Vec::new();
            for _ in 0..pieces {
                let mark = vertices.len();
                loop {
                    if excursion_from(lattice, &plan.rank, i as u32, x, &mut vertices, rng, &mut dirs) {
                        break;
                    }
                    vertices.truncate(mark);
                }
            }
            loops.push(Loop { vertices });
        }
    }
    Ok(LoopSoup { lambda, loops })
}

/// `q_m(x, x)`, the probability that the killed walk from `x` sits at `x` after `m` steps,
/// for `m = 0..=max_len`, indexed `[m][x]`.
pub fn return_weights(lattice: &LatticeDisk, max_len: usize) -> Vec<Vec<f64>> {
    let k = lattice.len();
    let mut out = vec![vec![0.0; k]; max_len + 1];
    for x in 0..k {
        let mut dist = vec![0.0; k];
        dist[x] = 1.0;
        out[0][x] = 1.0;
        for m in 1..=max_len {
            let mut next = vec![0.0; k];
            for (v, &p) in dist.iter().enumerate() {
                if p != 0.0 {
                    for &s in lattice.neighbors(v as u32) {
                        if !is_boundary_slot(s) {
                            next[s as usize] += 0.25 * p;
                        }
                    }
                }
            }
            out[m][x] = next[x];
            dist = next;
        }
    }
    out
}

/// Fraction of the total loop mass carried by loops longer than `max_len`.
pub fn truncation_fraction(lattice: &LatticeDisk, max_len: usize) -> Result<f64> {
    let plan = PeelingPlan::new(lattice, PeelOrder::RowMajor)?;
    let q = return_weights(lattice, max_len);
    let kept: f64 = (1..=max_len).map(|m| q[m].iter().sum::<f64>() / m as f64).sum();
    Ok(1.0 - kept / plan.total_mass())
}

/// Loop soup restricted to loops of length at most `max_len`, drawn root by root and length
/// by length with rejection. Only for tiny lattices.
pub fn sample_loop_soup_rejection<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    lambda: f64,
    max_len: usize,
    rng: &mut R,
) -> Result<LoopSoup> {
    if lattice.len() > 100 || max_len > 20 {
        return invalid("rejection sampler needs at most 100 vertices and loop length at most 20");
    }
    if !(lambda > 0.0) {
        return invalid(format!("loop intensity {lambda} must be positive"));
    }
    let q = return_weights(lattice, max_len);
    let mut dirs = DirectionSource::new();
    let mut loops = Vec::new();
    for x in 0..lattice.len() as u32 {
        for m in 2..=max_len {
            let count = poisson(lambda * q[m][x as usize] / m as f64, rng)?;
            for _ in 0..count {
                let mut walk = Vec::with_capacity(m);
                'attempt: loop {
                    walk.clear();
                    let mut v = x;
                    for _ in 0..m {
                        walk.push(v);
                        let s = lattice.neighbors(v)[dirs.next(rng)];
                        if is_boundary_slot(s) {
                            continue 'attempt;
                        }
                        v = s;
                    }
                    if v == x {
                        break;
                    }
                }
                let shift = rng.random_range(0..m);
                walk.rotate_left(shift);
                let base = (0..m).min_by_key(|&k| walk[k]).unwrap();
                walk.rotate_left(base);
                loops.push(Loop { vertices: walk });
            }
        }
    }
    Ok(LoopSoup { lambda, loops })
}

/// Vertex sets of the clusters formed by intersecting loops.
pub fn loop_clusters(lattice: &LatticeDisk, soup: &LoopSoup) -> Vec<Vec<u32>> {
    let mut uf = UnionFind::new(lattice.len());
    let covered = soup.covered(lattice);
    for l in &soup.loops {
        for &v in &l.vertices[1..] {
            uf.union(l.vertices[0], v);
        }
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for v in covered.iter() {
        groups.entry(uf.find(v)).or_default().push(v);
    }
    groups.into_values().collect()
}

/// The occupied set together with every loop cluster that meets it.
pub fn combined_occupied(lattice: &LatticeDisk, occupied: &VertexSet, soup: &LoopSoup) -> VertexSet {
    let mut out = occupied.clone();
    for c in loop_clusters(lattice, soup) {
        if c.iter().any(|&v| occupied.contains(v)) {
            for v in c {
                out.insert(v);
            }
        }
    }
    out
}

/// `λ(κ) = (8 - 3κ)(κ - 6) / (4κ)`, the loop intensity matched to `SLE_κ`.
pub fn lambda_of_kappa(kappa: f64) -> Result<f64> {
    if !(8.0 / 3.0 - 1e-12..=4.0 + 1e-12).contains(&kappa) {
        return invalid(format!("kappa={kappa} must lie in [8/3, 4]"));
    }
    Ok((8.0 - 3.0 * kappa) * (kappa - 6.0) / (4.0 * kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::DirichletSolver;
    use crate::rng::stream;

    #[test]
    fn hilbert_curve_visits_neighbors() {
        for k in 1..6 {
            let side = 1u32 << k;
            let mut cells: Vec<(u64, u32, u32)> =
                (0..side).flat_map(|x| (0..side).map(move |y| (hilbert_index(k, x, y), x, y))).collect();
            cells.sort();
            for (i, w) in cells.windows(2).enumerate() {
                assert_eq!(w[0].0, i as u64);
                assert_eq!(w[0].1.abs_diff(w[1].1) + w[0].2.abs_diff(w[1].2), 1);
            }
        }
        let l = LatticeDisk::new(16).unwrap();
        let o = hilbert_order(&l);
        let mut sorted = o.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), l.len());
    }

    #[test]
    fn first_return_probability_uses_full_green() {
        let l = LatticeDisk::new(6).unwrap();
        let plan = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap();
        let s = DirichletSolver::full(&l).unwrap();
        let x = plan.order()[0];
        let g = s.green(x, x).unwrap();
        assert!((plan.return_probability(0) - (1.0 - 1.0 / (4.0 * g))).abs() < 1e-12);
    }

    #[test]
    fn total_mass_does_not_depend_on_order() {
        let l = LatticeDisk::new(7).unwrap();
        let a = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap().total_mass();
        let b = PeelingPlan::new(&l, PeelOrder::RowMajor).unwrap().total_mass();
        assert!((a - b).abs() < 1e-10);
        let q = return_weights(&l, 3000);
        let series: f64 = (1..=3000).map(|m| q[m].iter().sum::<f64>() / m as f64).sum();
        assert!((a - series).abs() < 1e-9, "{a} vs {series}");
    }

    #[test]
    fn log_series_mean() {
        let mut rng = stream(8, 0);
        let r: f64 = 0.6;
        let reps = 50_000;
        let mean = (0..reps).map(|_| sample_log_series(r, &mut rng) as f64).sum::<f64>() / reps as f64;
        let exact = r / ((1.0 - r) * -(1.0 - r).ln());
        assert!((mean - exact).abs() < 0.03, "{mean} vs {exact}");
    }

    #[test]
    fn truncation_on_small_lattice() {
        let l = LatticeDisk::new(2).unwrap();
        assert!(truncation_fraction(&l, 20).unwrap() < 0.01);
        let q = return_weights(&l, 2);
        let o = l.index_of(0, 0).unwrap() as usize;
        assert!((q[2][o] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn loops_stay_in_domain_and_close() {
        let l = LatticeDisk::new(10).unwrap();
        let plan = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap();
        let mut rng = stream(10, 0);
        let soup = sample_loop_soup(&l, &plan, 1.0, &mut rng).unwrap();
        let mut rank = vec![0; l.len()];
        for (i, &v) in plan.order().iter().enumerate() {
            rank[v as usize] = i;
        }
        for lp in &soup.loops {
            assert!(lp.len() >= 2 && lp.len() % 2 == 0);
            let b = rank[lp.base() as usize];
            for (k, &v) in lp.vertices.iter().enumerate() {
                assert!(rank[v as usize] >= b);
                let w = lp.vertices[(k + 1) % lp.len()];
                assert!(l.neighbors(v).contains(&w));
            }
        }
        assert!(sample_loop_soup(&l, &plan, 0.0, &mut rng).is_err());
    }

    #[test]
    fn lambda_values() {
        assert!((lambda_of_kappa(4.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(lambda_of_kappa(8.0 / 3.0).unwrap(), 0.0);
        assert!(lambda_of_kappa(5.0).is_err());
    }

    #[test]
    fn combined_set_with_no_loops_is_trace() {
        let l = LatticeDisk::new(8).unwrap();
        let occ = l.ball_vertices((0.0, 0.0), 0.3).unwrap();
        assert_eq!(combined_occupied(&l, &occ, &LoopSoup::empty(0.0)), occ);
    }

    mod props {
        use super::*;
        use crate::rng::stream;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn clusters_are_the_closure_of_overlaps(seed in 0u64..10_000, lambda in 0.1f64..1.5) {
                let l = LatticeDisk::new(5).unwrap();
                let plan = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap();
                let soup = sample_loop_soup(&l, &plan, lambda, &mut stream(seed, 0)).unwrap();
                let clusters = loop_clusters(&l, &soup);
                let mut label = vec![usize::MAX; l.len()];
                for (c, vs) in clusters.iter().enumerate() {
                    for &v in vs {
                        prop_assert_eq!(label[v as usize], usize::MAX);
                        label[v as usize] = c;
                    }
                }
                prop_assert_eq!(clusters.iter().map(|c| c.len()).sum::<usize>(), soup.covered(&l).len());
                // every loop lies in one cluster, and the loops of a cluster are linked by overlaps
                let mut uf = crate::unionfind::UnionFind::new(soup.loops.len().max(1));
                for (a, la) in soup.loops.iter().enumerate() {
                    let c = label[la.base() as usize];
                    prop_assert!(la.vertices.iter().all(|&v| label[v as usize] == c));
                    for (b, lb) in soup.loops.iter().enumerate().skip(a + 1) {
                        if la.vertices.iter().any(|v| lb.vertices.contains(v)) {
                            uf.union(a as u32, b as u32);
                        }
                    }
                }
                let groups: std::collections::BTreeSet<u32> = (0..soup.loops.len() as u32).map(|a| uf.find(a)).collect();
                prop_assert_eq!(groups.len(), clusters.len());
            }

            #[test]
            fn combined_set_is_monotone(seed in 0u64..10_000, keep in 0.0f64..1.0, p in 0.0f64..0.3) {
                use rand::Rng;
                let l = LatticeDisk::new(6).unwrap();
                let plan = PeelingPlan::new(&l, PeelOrder::Hilbert).unwrap();
                let mut rng = stream(seed, 1);
                let soup = sample_loop_soup(&l, &plan, 1.0, &mut rng).unwrap();
                // Bernoulli thinning of the loops is a soup of smaller intensity
                let thin = LoopSoup { lambda: keep, loops: soup.loops.iter().filter(|_| rng.random::<f64>() < keep).cloned().collect() };
                let small = VertexSet::from_iter(&l, (0..l.len() as u32).filter(|_| rng.random::<f64>() < p));
                let mut big = small.clone();
                big.union_with(&VertexSet::from_iter(&l, (0..l.len() as u32).filter(|_| rng.random::<f64>() < 0.1)));
                let base = combined_occupied(&l, &small, &thin);
                prop_assert!(base.is_subset(&combined_occupied(&l, &big, &thin)));
                prop_assert!(base.is_subset(&combined_occupied(&l, &small, &soup)));
            }
        }
    }
}
