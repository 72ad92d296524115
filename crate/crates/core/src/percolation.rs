//! Crossing probabilities for vacant sets and level sets, with replica
//! coupling across parameter grids and logistic threshold fits.

use crate::error::{invalid, Result};
use crate::excursions::{sample_cloud_direct, SampleOptions};
use crate::gff::{cable_level_set_coupled, level_set, GffSampler};
use crate::lattice::{LatticeDisk, VertexSet};
use crate::loopsoup::{combined_occupied, sample_loop_soup, PeelOrder, PeelingPlan, LoopSoup};
use crate::rng::{replicate, StreamRng};
use crate::stats::{logistic_fit, wilson_interval, LogisticFit};
use crate::unionfind::UnionFind;
use rand::Rng;
use serde::Serialize;

/// Open set whose crossings are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Model {
    /// Vacant set of the excursion cloud at level `u`.
    Vacant { u: f64 },
    /// Vacant set after adding the loop clusters of intensity `lambda` that meet the cloud.
    VacantWithLoops { u: f64, lambda: f64 },
    /// Vertex level set `{φ ≥ h}` with nearest-neighbor adjacency.
    GffLevel { h: f64 },
    /// Level set on the cable system: an edge is usable only if its whole cable stays above `h`.
    CableGffLevel { h: f64 },
}

/// Where a crossing from `B_n(r)` has to arrive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Target {
    /// Any vertex with `|x| ≥ 1 - eps`.
    Annulus { eps: f64 },
    /// The inner boundary `∂̂D_n`.
    InnerBoundary,
    /// Any vertex with `|x| ≥ 1 - n^{-1/7}`.
    BoundaryLayer,
}

impl Target {
    pub fn vertices(&self, lattice: &LatticeDisk) -> Result<VertexSet> {
        match *self {
            Target::Annulus { eps } => {
                if !(eps > 0.0 && eps < 1.0) {
                    return invalid(format!("eps={eps} must lie in (0, 1)"));
                }
                Ok(lattice.outside_radius(1.0 - eps))
            }
            Target::InnerBoundary => Ok(lattice.inner_boundary_set()),
            Target::BoundaryLayer => Ok(lattice.outside_radius(1.0 - (lattice.n() as f64).powf(-1.0 / 7.0))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub p: f64,
    pub successes: u64,
    pub reps: u64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, reps: u64, seed: u64) -> Self {
        let p = successes as f64 / reps.max(1) as f64;
        let (wilson_lo, wilson_hi) = wilson_interval(successes, reps, 1.96);
        Estimate { p, successes, reps, stderr: (p * (1.0 - p) / reps.max(1) as f64).sqrt(), wilson_lo, wilson_hi, seed }
    }
}

/// Whether some vertex of `a` and some vertex of `b` are joined by a path in `open`.
/// With `edges`, an interior edge is usable only when its flag is set.
pub fn connected(lattice: &LatticeDisk, open: &VertexSet, edges: Option<&[bool]>, a: &VertexSet, b: &VertexSet) -> bool {
    let mut uf = UnionFind::new(lattice.len());
    for (k, &(x, y)) in lattice.interior_edges().iter().enumerate() {
        if open.contains(x) && open.contains(y) && edges.is_none_or(|e| e[k]) {
            uf.union(x, y);
        }
    }
    let mut roots = VertexSet::empty(lattice);
    for v in a.iter().filter(|&v| open.contains(v)) {
        roots.insert(uf.find(v));
    }
    if roots.is_empty() {
        return false;
    }
    b.iter().filter(|&v| open.contains(v)).any(|v| roots.contains(uf.find(v)))
}

/// Shared precomputation for repeated sampling on one lattice.
pub struct Context {
    pub lattice: LatticeDisk,
    gff: Option<GffSampler>,
    plan: Option<PeelingPlan>,
}

impl Context {
    pub fn new(n: u32, needs_field: bool, needs_loops: bool) -> Result<Self> {
        let lattice = LatticeDisk::new(n)?;
        let gff = if needs_field { Some(GffSampler::new(&lattice)?) } else { None };
        let plan = if needs_loops { Some(PeelingPlan::new(&lattice, PeelOrder::Hilbert)?) } else { None };
        Ok(Context { lattice, gff, plan })
    }

    pub fn for_model(n: u32, model: Model) -> Result<Self> {
        let field = matches!(model, Model::GffLevel { .. } | Model::CableGffLevel { .. });
        let loops = matches!(model, Model::VacantWithLoops { lambda, .. } if lambda > 0.0);
        Self::new(n, field, loops)
    }

    pub fn gff(&self) -> Result<&GffSampler> {
        self.gff.as_ref().ok_or_else(|| crate::Error::InvalidParameter("context built without a field sampler".into()))
    }

    pub fn plan(&self) -> Result<&PeelingPlan> {
        self.plan.as_ref().ok_or_else(|| crate::Error::InvalidParameter("context built without a peeling plan".into()))
    }

    /// Loop soup of intensity `lambda`; draws nothing at all when `lambda <= 0`.
    pub fn loops<R: Rng + ?Sized>(&self, lambda: f64, rng: &mut R) -> Result<LoopSoup> {
        if lambda <= 0.0 {
            return Ok(LoopSoup::empty(0.0));
        }
        sample_loop_soup(&self.lattice, self.plan()?, lambda, rng)
    }

    /// One sample of the open set and, for cable models, the open edges.
    pub fn sample_open<R: Rng + ?Sized>(&self, model: Model, rng: &mut R) -> Result<(VertexSet, Option<Vec<bool>>)> {
        let l = &self.lattice;
        Ok(match model {
            Model::Vacant { u } => (sample_cloud_direct(l, u, SampleOptions::default(), rng)?.vacant(), None),
            Model::VacantWithLoops { u, lambda } => {
                let cloud = sample_cloud_direct(l, u, SampleOptions::default(), rng)?;
                let soup = self.loops(lambda, rng)?;
                (combined_occupied(l, &cloud.occupied, &soup).complement(), None)
            }
            Model::GffLevel { h } => (level_set(l, &self.gff()?.sample(rng), h), None),
            Model::CableGffLevel { h } => {
                let phi = self.gff()?.sample(rng);
                let uni: Vec<f64> = (0..l.interior_edges().len()).map(|_| rng.random()).collect();
                let c = cable_level_set_coupled(l, &phi, h, &uni);
                (c.vertices, Some(c.open_edges))
            }
        })
    }
}

/// Monte Carlo estimate of `P(B_n(r) ↔ target)` in the model's open set.
pub fn crossing_probability(ctx: &Context, model: Model, r: f64, target: Target, reps: usize, seed: u64) -> Result<Estimate> {
    let l = &ctx.lattice;
    let a = l.ball_vertices((0.0, 0.0), r)?;
    let b = target.vertices(l)?;
    let hits = replicate(seed, reps, |_, rng| -> Result<bool> {
        let (open, edges) = ctx.sample_open(model, rng)?;
        Ok(connected(l, &open, edges.as_deref(), &a, &b))
    });
    let mut k = 0;
    for h in hits {
        k += h? as u64;
    }
    Ok(Estimate::from_counts(k, reps as u64, seed))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) || grid[0] < 0.0 {
        return invalid("parameter grid must be nonempty, nonnegative and strictly increasing");
    }
    Ok(())
}

/// Crossing estimates over an increasing grid of levels `u`, all read off one cloud per replica
/// by label thinning, plus (if `lambda > 0`) one loop soup per replica.
pub fn vacant_curve(ctx: &Context, r: f64, target: Target, grid: &[f64], lambda: f64, reps: usize, seed: u64) -> Result<Vec<Estimate>> {
    check_grid(grid)?;
    let l = &ctx.lattice;
    let a = l.ball_vertices((0.0, 0.0), r)?;
    let b = target.vertices(l)?;
    let umax = *grid.last().unwrap();
    let rows = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<Vec<bool>> {
        let mut cloud = sample_cloud_direct(l, umax, SampleOptions { record_paths: true }, rng)?;
        let soup = ctx.loops(lambda, rng)?;
        cloud.excursions.sort_by(|x, y| x.label.total_cmp(&y.label));
        let mut occupied = VertexSet::empty(l);
        let mut next = 0;
        let mut out = Vec::with_capacity(grid.len());
        for &u in grid {
            while next < cloud.excursions.len() && cloud.excursions[next].label <= u {
                for &v in cloud.excursions[next].path.as_ref().unwrap() {
                    occupied.insert(v);
                }
                next += 1;
            }
            let occ = if soup.loops.is_empty() { occupied.clone() } else { combined_occupied(l, &occupied, &soup) };
            out.push(connected(l, &occ.complement(), None, &a, &b));
        }
        Ok(out)
    });
    tally(rows, grid.len(), seed)
}

/// Crossing estimates over an increasing grid of levels `h`, one field per replica.
pub fn gff_curve(ctx: &Context, r: f64, target: Target, grid: &[f64], cable: bool, reps: usize, seed: u64) -> Result<Vec<Estimate>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("level grid must be nonempty and strictly increasing");
    }
    let l = &ctx.lattice;
    let a = l.ball_vertices((0.0, 0.0), r)?;
    let b = target.vertices(l)?;
    let sampler = ctx.gff()?;
    let rows = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<Vec<bool>> {
        let phi = sampler.sample(rng);
        let uni: Vec<f64> = if cable { (0..l.interior_edges().len()).map(|_| rng.random()).collect() } else { Vec::new() };
        Ok(grid
            .iter()
            .map(|&h| {
                if cable {
                    let c = cable_level_set_coupled(l, &phi, h, &uni);
                    connected(l, &c.vertices, Some(&c.open_edges), &a, &b)
                } else {
                    connected(l, &level_set(l, &phi, h), None, &a, &b)
                }
            })
            .collect())
    });
    tally(rows, grid.len(), seed)
}

fn tally(rows: Vec<Result<Vec<bool>>>, len: usize, seed: u64) -> Result<Vec<Estimate>> {
    let reps = rows.len() as u64;
    let mut k = vec![0u64; len];
    for row in rows {
        for (c, hit) in k.iter_mut().zip(row?) {
            *c += hit as u64;
        }
    }
    Ok(k.into_iter().map(|k| Estimate::from_counts(k, reps, seed)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub grid: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub fit: LogisticFit,
}

/// Coupled vacant-set curves for each `n` with a logistic midpoint fit.
pub fn threshold_sweep(ns: &[u32], r: f64, target: Target, grid: &[f64], lambda: f64, reps: usize, seed: u64) -> Result<Vec<SweepRow>> {
    ns.iter()
        .map(|&n| {
            let ctx = Context::new(n, false, lambda > 0.0)?;
            let est = vacant_curve(&ctx, r, target, grid, lambda, reps, crate::rng::derive_seed(seed, n as u64))?;
            let pts: Vec<(f64, u64, u64)> = grid.iter().zip(&est).map(|(&x, e)| (x, e.successes, e.reps)).collect();
            Ok(SweepRow { n, grid: grid.to_vec(), estimates: est, fit: logistic_fit(&pts) })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DominationReport {
    pub u: f64,
    pub level: f64,
    pub gff: Estimate,
    pub vacant: Estimate,
    /// `p_gff ≤ p_vacant + 2σ` with the two standard errors combined.
    pub holds: bool,
}

/// Compares crossing of `{φ ≥ sqrt(2u)}` with crossing of the vacant set of excursions
/// plus loop clusters at intensity one half.
pub fn isomorphism_domination(n: u32, u: f64, r: f64, eps: f64, reps: usize, seed: u64) -> Result<DominationReport> {
    if !(u > 0.0) {
        return invalid(format!("u={u} must be positive"));
    }
    let ctx = Context::new(n, true, true)?;
    let target = Target::Annulus { eps };
    let level = (2.0 * u).sqrt();
    let gff = crossing_probability(&ctx, Model::GffLevel { h: level }, r, target, reps, crate::rng::derive_seed(seed, 1))?;
    let vacant = crossing_probability(
        &ctx,
        Model::VacantWithLoops { u, lambda: 0.5 },
        r,
        target,
        reps,
        crate::rng::derive_seed(seed, 2),
    )?;
    let sigma = (gff.stderr.powi(2) + vacant.stderr.powi(2)).sqrt();
    Ok(DominationReport { u, level, gff, vacant, holds: gff.p <= vacant.p + 2.0 * sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn connected_basics() {
        let l = LatticeDisk::new(8).unwrap();
        let a = l.ball_vertices((0.0, 0.0), 0.2).unwrap();
        let b = l.outside_radius(0.9);
        assert!(connected(&l, &l.full_set(), None, &a, &b));
        assert!(!connected(&l, &VertexSet::empty(&l), None, &a, &b));
        let mut ring = l.full_set();
        ring.difference_with(&l.ball_vertices((0.0, 0.0), 0.5).unwrap());
        ring.union_with(&a);
        assert!(!connected(&l, &ring, None, &a, &b));
        let none = vec![false; l.interior_edges().len()];
        assert!(!connected(&l, &l.full_set(), Some(&none), &a, &b));
    }

    #[test]
    fn zero_intensity_always_crosses() {
        let ctx = Context::new(12, false, false).unwrap();
        let e = crossing_probability(&ctx, Model::Vacant { u: 0.0 }, 0.3, Target::Annulus { eps: 0.1 }, 20, 1).unwrap();
        assert_eq!(e.p, 1.0);
    }

    #[test]
    fn loops_at_zero_intensity_match_plain_vacant_bitwise() {
        let ctx = Context::new(16, false, false).unwrap();
        let t = Target::Annulus { eps: 0.1 };
        let a = crossing_probability(&ctx, Model::Vacant { u: 0.8 }, 0.3, t, 200, 5).unwrap();
        let b = crossing_probability(&ctx, Model::VacantWithLoops { u: 0.8, lambda: 0.0 }, 0.3, t, 200, 5).unwrap();
        assert_eq!(a.successes, b.successes);
    }

    #[test]
    fn curve_is_monotone_in_u() {
        let ctx = Context::new(24, false, true).unwrap();
        let grid = [0.2, 0.6, 1.0, 1.4, 2.0];
        for lambda in [0.0, 0.5] {
            let est = vacant_curve(&ctx, 0.3, Target::Annulus { eps: 0.1 }, &grid, lambda, 200, 3).unwrap();
            for w in est.windows(2) {
                assert!(w[1].successes <= w[0].successes);
            }
        }
    }

    #[test]
    fn gff_curves_are_monotone_and_cable_is_harder() {
        let ctx = Context::new(20, true, false).unwrap();
        let grid = [-0.5, 0.0, 0.4, 0.8];
        let t = Target::Annulus { eps: 0.1 };
        let v = gff_curve(&ctx, 0.3, t, &grid, false, 200, 4).unwrap();
        let c = gff_curve(&ctx, 0.3, t, &grid, true, 200, 4).unwrap();
        for k in 0..grid.len() {
            assert!(c[k].successes <= v[k].successes);
            if k > 0 {
                assert!(v[k].successes <= v[k - 1].successes);
                assert!(c[k].successes <= c[k - 1].successes);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn connectivity_is_monotone_in_open_set(seed in 0u64..10_000, p in 0.3f64..0.8) {
            let l = LatticeDisk::new(10).unwrap();
            let mut rng = crate::rng::stream(seed, 0);
            let small = VertexSet::from_iter(&l, (0..l.len() as u32).filter(|_| rng.random::<f64>() < p));
            let mut big = small.clone();
            for v in 0..l.len() as u32 {
                if rng.random::<f64>() < 0.3 { big.insert(v); }
            }
            let a = l.ball_vertices((0.0, 0.0), 0.3).unwrap();
            let b = l.outside_radius(0.9);
            if connected(&l, &small, None, &a, &b) {
                prop_assert!(connected(&l, &big, None, &a, &b));
            }
        }

        #[test]
        fn connectivity_is_invariant_under_rotation(seed in 0u64..10_000, p in 0.4f64..0.7) {
            let l = LatticeDisk::new(9).unwrap();
            let mut rng = crate::rng::stream(seed, 1);
            let open = VertexSet::from_iter(&l, (0..l.len() as u32).filter(|_| rng.random::<f64>() < p));
            let rot = |v: u32| { let (i, j) = l.coord(v); l.index_of(-j, i).unwrap() };
            let turned = VertexSet::from_iter(&l, open.iter().map(rot));
            let a = l.ball_vertices((0.0, 0.0), 0.3).unwrap();
            let b = l.outside_radius(0.85);
            prop_assert_eq!(connected(&l, &open, None, &a, &b), connected(&l, &turned, None, &a, &b));
        }

        #[test]
        fn farther_target_is_harder(seed in 0u64..10_000, p in 0.4f64..0.8) {
            let l = LatticeDisk::new(12).unwrap();
            let mut rng = crate::rng::stream(seed, 2);
            let open = VertexSet::from_iter(&l, (0..l.len() as u32).filter(|_| rng.random::<f64>() < p));
            let a = l.ball_vertices((0.0, 0.0), 0.3).unwrap();
            let near = Target::Annulus { eps: 0.3 }.vertices(&l).unwrap();
            let far = Target::InnerBoundary.vertices(&l).unwrap();
            if connected(&l, &open, None, &a, &far) {
                prop_assert!(connected(&l, &open, None, &a, &near));
            }
        }
    }
}
