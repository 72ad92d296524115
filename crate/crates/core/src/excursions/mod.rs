//! Poisson clouds of random-walk excursions in `D_n` and Brownian excursions
//! in the unit disk.
//!
//! Three discrete samplers share the same law for the occupied set: drawing
//! excursions edge by edge, the local picture around a set `K` seen from its
//! equilibrium measure, and a single walk on `D_n` with the boundary glued to
//! one vertex, run until its local time there reaches `u`.

pub mod continuum;

use crate::error::{invalid, Error, Result};
use crate::lattice::{boundary_index, is_boundary_slot, LatticeDisk, VertexSet};
use crate::potential::EquilibriumMeasure;
use crate::rng::DirectionSource;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

/// A boundary crossing: the interior vertex and the index of the outer point.
pub type BoundaryEdge = (u32, u32);

#[derive(Clone, Debug)]
pub struct Excursion {
    /// Thinning label, uniform on `[0, u]`.
    pub label: f64,
    /// Edge through which the excursion entered; `None` for forward parts started inside.
    pub entry: Option<BoundaryEdge>,
    pub start: u32,
    pub exit: BoundaryEdge,
    /// Number of interior vertices visited, counted with repetition.
    pub steps: u32,
    /// Interior vertices in order, when recorded.
    pub path: Option<Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct ExcursionCloud {
    pub u: f64,
    pub excursions: Vec<Excursion>,
    pub occupied: VertexSet,
}

impl ExcursionCloud {
    pub fn count(&self) -> usize {
        self.excursions.len()
    }

    pub fn vacant(&self) -> VertexSet {
        self.occupied.complement()
    }

    /// The sub-cloud of excursions with label at most `u2`, which has the law of the cloud at level `u2`.
    pub fn thin(&self, lattice: &LatticeDisk, u2: f64) -> Result<ExcursionCloud> {
        if !(0.0..=self.u).contains(&u2) {
            return invalid(format!("thinning level {u2} must lie in [0, {}]", self.u));
        }
        let mut occupied = VertexSet::empty(lattice);
        let mut kept = Vec::new();
        for e in &self.excursions {
            if e.label <= u2 {
                let Some(p) = &e.path else {
                    return invalid("thinning needs recorded paths");
                };
                for &v in p {
                    occupied.insert(v);
                }
                kept.push(e.clone());
            }
        }
        Ok(ExcursionCloud { u: u2, excursions: kept, occupied })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SampleOptions {
    pub record_paths: bool,
}

fn check_u(u: f64) -> Result<()> {
    if !(u >= 0.0 && u.is_finite()) {
        return invalid(format!("intensity u={u} must be finite and nonnegative"));
    }
    Ok(())
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(p.sample(rng) as u64)
}

/// Simple random walk from `start` until it steps onto `∂D_n`.
pub fn walk_to_boundary<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    start: u32,
    rng: &mut R,
    dirs: &mut DirectionSource,
    occupied: &mut VertexSet,
    mut path: Option<&mut Vec<u32>>,
) -> (BoundaryEdge, u32) {
    let mut v = start;
    let mut steps = 0u32;
    loop {
        occupied.insert(v);
        if let Some(p) = path.as_deref_mut() {
            p.push(v);
        }
        steps += 1;
        let s = lattice.neighbors(v)[dirs.next(rng)];
        if is_boundary_slot(s) {
            return ((v, boundary_index(s) as u32), steps);
        }
        v = s;
    }
}

fn run_excursion<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    label: f64,
    entry: Option<BoundaryEdge>,
    start: u32,
    opts: SampleOptions,
    rng: &mut R,
    dirs: &mut DirectionSource,
    occupied: &mut VertexSet,
) -> Excursion {
    let mut path = opts.record_paths.then(Vec::new);
    let (exit, steps) = walk_to_boundary(lattice, start, rng, dirs, occupied, path.as_mut());
    Excursion { label, entry, start, exit, steps, path }
}

/// Cloud at level `u`: Poisson(`u |∂ edges|`) excursions entering through uniform boundary edges.
pub fn sample_cloud_direct<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    u: f64,
    opts: SampleOptions,
    rng: &mut R,
) -> Result<ExcursionCloud> {
    check_u(u)?;
    let edges = lattice.boundary_edges();
    let count = poisson(u * edges.len() as f64, rng)?;
    let mut occupied = VertexSet::empty(lattice);
    let mut dirs = DirectionSource::new();
    let mut excursions = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let label = u * rng.random::<f64>();
        let e = edges[rng.random_range(0..edges.len())];
        excursions.push(run_excursion(lattice, label, Some(e), e.0, opts, rng, &mut dirs, &mut occupied));
    }
    Ok(ExcursionCloud { u, excursions, occupied })
}

/// Forward parts of the excursions that hit `K`: Poisson(`u cap(K)`) walks started from `ē_K`.
pub fn sample_hitting<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    u: f64,
    eq: &EquilibriumMeasure,
    opts: SampleOptions,
    rng: &mut R,
) -> Result<ExcursionCloud> {
    check_u(u)?;
    eq.set.check(lattice)?;
    let sampler = eq.sampler()?;
    let count = poisson(u * eq.capacity, rng)?;
    let mut occupied = VertexSet::empty(lattice);
    let mut dirs = DirectionSource::new();
    let mut excursions = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let label = u * rng.random::<f64>();
        let x = sampler.sample(rng);
        excursions.push(run_excursion(lattice, label, None, x, opts, rng, &mut dirs, &mut occupied));
    }
    Ok(ExcursionCloud { u, excursions, occupied })
}

/// One continuous-time walk on `D_n ∪ {x_n}` (boundary glued to `x_n`), jumping along each
/// edge at rate one, run until its local time at `x_n` exceeds `u`.
pub fn sample_cloud_single_walk<R: Rng + ?Sized>(
    lattice: &LatticeDisk,
    u: f64,
    opts: SampleOptions,
    rng: &mut R,
) -> Result<ExcursionCloud> {
    check_u(u)?;
    let edges = lattice.boundary_edges();
    let hold = Exp::new(edges.len() as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut occupied = VertexSet::empty(lattice);
    let mut dirs = DirectionSource::new();
    let mut excursions = Vec::new();
    let mut local_time = 0.0;
    loop {
        local_time += hold.sample(rng);
        if local_time > u {
            break;
        }
        let e = edges[rng.random_range(0..edges.len())];
        excursions.push(run_excursion(lattice, local_time, Some(e), e.0, opts, rng, &mut dirs, &mut occupied));
    }
    Ok(ExcursionCloud { u, excursions, occupied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_intensity_is_empty() {
        let l = LatticeDisk::new(8).unwrap();
        let mut rng = stream(1, 0);
        let c = sample_cloud_direct(&l, 0.0, SampleOptions::default(), &mut rng).unwrap();
        assert_eq!(c.count(), 0);
        assert_eq!(c.vacant(), l.full_set());
        assert!(sample_cloud_direct(&l, -1.0, SampleOptions::default(), &mut rng).is_err());
    }

    #[test]
    fn mean_visits_are_four_u() {
        let l = LatticeDisk::new(6).unwrap();
        let u = 0.7;
        let reps = 20_000;
        let mut visits = vec![0u64; l.len()];
        let mut rng = stream(3, 0);
        let opts = SampleOptions { record_paths: true };
        for _ in 0..reps {
            let c = sample_cloud_direct(&l, u, opts, &mut rng).unwrap();
            for e in &c.excursions {
                for &v in e.path.as_ref().unwrap() {
                    visits[v as usize] += 1;
                }
            }
        }
        let o = l.index_of(0, 0).unwrap() as usize;
        let mean = visits[o] as f64 / reps as f64;
        assert!((mean - 4.0 * u).abs() < 0.1, "mean visits {mean}");
    }

    #[test]
    fn thinning_needs_paths_and_matches_labels() {
        let l = LatticeDisk::new(10).unwrap();
        let mut rng = stream(5, 0);
        let c = sample_cloud_direct(&l, 1.0, SampleOptions { record_paths: true }, &mut rng).unwrap();
        let t = c.thin(&l, 0.4).unwrap();
        assert!(t.excursions.iter().all(|e| e.label <= 0.4));
        assert!(t.occupied.is_subset(&c.occupied));
        let bare = sample_cloud_direct(&l, 1.0, SampleOptions::default(), &mut rng).unwrap();
        assert!(bare.thin(&l, 0.5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn paths_are_walks_and_cover_the_occupied_set(seed in 0u64..10_000, u in 0.05f64..1.0) {
                let l = LatticeDisk::new(7).unwrap();
                let c = sample_cloud_direct(&l, u, SampleOptions { record_paths: true }, &mut stream(seed, 0)).unwrap();
                let mut union = VertexSet::empty(&l);
                for e in &c.excursions {
                    let path = e.path.as_ref().unwrap();
                    prop_assert!(!path.is_empty());
                    prop_assert_eq!(path[0], e.start);
                    for w in path.windows(2) {
                        prop_assert!(l.neighbors(w[0]).contains(&w[1]));
                    }
                    prop_assert!(l.inner_boundary_set().contains(*path.last().unwrap()));
                    for &v in path {
                        union.insert(v);
                    }
                }
                prop_assert_eq!(&union, &c.occupied);
                let mut both = c.vacant();
                both.intersect_with(&c.occupied);
                prop_assert!(both.is_empty());
            }
        }
    }
}
