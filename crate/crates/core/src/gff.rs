//! Discrete Gaussian free field on `D_n`, its level sets, the cable-system
//! refinement and the exploration martingale.

use crate::error::Result;
use crate::lattice::{LatticeDisk, VertexSet};
use crate::potential::{equilibrium_measure, DirichletSolver, SolverOptions, Backend};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub use crate::percolation::{isomorphism_domination, DominationReport};

/// Samples `φ` with covariance `G^{(n)}` through a sparse Cholesky factor.
pub struct GffSampler {
    solver: DirichletSolver,
}

impl GffSampler {
    pub fn new(lattice: &LatticeDisk) -> Result<Self> {
        let opts = SolverOptions { backend: Backend::Direct, ..Default::default() };
        Ok(GffSampler { solver: DirichletSolver::new(lattice, &lattice.full_set(), opts)? })
    }

    pub fn solver(&self) -> &DirichletSolver {
        &self.solver
    }

    /// Field values indexed by vertex.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.solver.domain().len()).map(|_| StandardNormal.sample(rng)).collect();
        self.solver.correlate(&z).expect("direct backend")
    }
}

pub fn level_set(lattice: &LatticeDisk, phi: &[f64], h: f64) -> VertexSet {
    VertexSet::from_iter(lattice, (0..lattice.len() as u32).filter(|&v| phi[v as usize] >= h))
}

/// `p(a, b) = 1 - exp(-2ab)`: a unit-time Brownian bridge from `a > 0` to `b > 0` stays positive.
pub fn bridge_positive_probability(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        -(-2.0 * a * b).exp_m1()
    }
}

/// Probability that the field on a cable of the metric graph stays above `h`,
/// given endpoint values `a` and `b`.
pub fn cable_open_probability(a: f64, b: f64, h: f64) -> f64 {
    bridge_positive_probability(2f64.sqrt() * (a - h), 2f64.sqrt() * (b - h))
}

/// Cable level set `Ẽ^{≥h}` traced on the lattice: vertices with `φ ≥ h` and the cables
/// that stay above `h` throughout.
#[derive(Clone, Debug)]
pub struct CableLevelSet {
    pub h: f64,
    pub vertices: VertexSet,
    /// Indexed like `lattice.interior_edges()`.
    pub open_edges: Vec<bool>,
}

pub fn cable_level_set<R: Rng + ?Sized>(lattice: &LatticeDisk, phi: &[f64], h: f64, rng: &mut R) -> CableLevelSet {
    let uniforms: Vec<f64> = (0..lattice.interior_edges().len()).map(|_| rng.random()).collect();
    cable_level_set_coupled(lattice, phi, h, &uniforms)
}

/// Same as [`cable_level_set`] with the per-edge uniforms supplied, which couples levels monotonically.
pub fn cable_level_set_coupled(lattice: &LatticeDisk, phi: &[f64], h: f64, uniforms: &[f64]) -> CableLevelSet {
    let open_edges = lattice
        .interior_edges()
        .iter()
        .zip(uniforms)
        .map(|(&(a, b), &u)| u < cable_open_probability(phi[a as usize], phi[b as usize], h))
        .collect();
    CableLevelSet { h, vertices: level_set(lattice, phi, h), open_edges }
}

/// `M_K = Σ_x e_K(x) φ_x`.
pub fn exploration_martingale(eq: &crate::potential::EquilibriumMeasure, phi: &[f64]) -> f64 {
    eq.support.iter().map(|&(x, m)| m * phi[x as usize]).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationStep {
    pub size: usize,
    pub martingale: f64,
    pub capacity: f64,
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub steps: Vec<ExplorationStep>,
    pub explored: VertexSet,
    /// Vertices of the explored set where `φ < h`.
    pub stopped: VertexSet,
    pub reached_boundary: bool,
}

impl Exploration {
    pub fn last(&self) -> &ExplorationStep {
        self.steps.last().expect("at least the initial step")
    }
}

/// Breadth-first exploration of the `{φ ≥ h}` clusters seen from `B_n(r)`. Every vertex of
/// the ball is crossed; other vertices are added when adjacent to a crossed vertex and crossed
/// only if `φ ≥ h` there. Stops when nothing new can be added or a crossed vertex lies on `∂̂D_n`.
/// With `record_all` the martingale and capacity are computed after every layer, otherwise only
/// for the initial and final sets.
pub fn explore(lattice: &LatticeDisk, phi: &[f64], h: f64, r: f64, record_all: bool) -> Result<Exploration> {
    let mut explored = lattice.ball_vertices((0.0, 0.0), r)?;
    let inner = lattice.inner_boundary_set();
    let mut stopped = VertexSet::empty(lattice);
    let mut crossed: Vec<u32> = explored.iter().collect();
    let mut steps = Vec::new();
    let record = |k: &VertexSet, steps: &mut Vec<ExplorationStep>| -> Result<()> {
        let eq = equilibrium_measure(lattice, k)?;
        steps.push(ExplorationStep { size: k.len(), martingale: exploration_martingale(&eq, phi), capacity: eq.capacity });
        Ok(())
    };
    record(&explored, &mut steps)?;
    let mut reached = crossed.iter().any(|&v| inner.contains(v));
    while !reached {
        let mut layer = Vec::new();
        for &v in &crossed {
            for &s in lattice.neighbors(v) {
                if !crate::lattice::is_boundary_slot(s) && !explored.contains(s) {
                    explored.insert(s);
                    layer.push(s);
                }
            }
        }
        if layer.is_empty() {
            break;
        }
        crossed.clear();
        for v in layer {
            if phi[v as usize] >= h {
                crossed.push(v);
                reached |= inner.contains(v);
            } else {
                stopped.insert(v);
            }
        }
        if record_all {
            record(&explored, &mut steps)?;
        }
        if crossed.is_empty() {
            break;
        }
    }
    if !record_all && steps.last().map(|s| s.size) != Some(explored.len()) {
        record(&explored, &mut steps)?;
    }
    Ok(Exploration { steps, explored, stopped, reached_boundary: reached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::mean_and_variance;

    #[test]
    fn single_vertex_field_variance() {
        let l = LatticeDisk::new(1).unwrap();
        let s = GffSampler::new(&l).unwrap();
        let mut rng = stream(12, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| s.sample(&mut rng)[0]).collect();
        let (m, v) = mean_and_variance(&xs);
        assert!(m.abs() < 3.0 * (0.25f64 / 20_000.0).sqrt());
        assert!((v - 0.25).abs() < 3.0 * 0.25 * (2.0f64 / 20_000.0).sqrt());
    }

    #[test]
    fn covariance_matches_green_on_n3() {
        let l = LatticeDisk::new(3).unwrap();
        let s = GffSampler::new(&l).unwrap();
        let mut rng = stream(13, 0);
        let reps = 40_000;
        let (a, b) = (l.index_of(0, 0).unwrap(), l.index_of(1, 1).unwrap());
        let mut sab = 0.0;
        for _ in 0..reps {
            let f = s.sample(&mut rng);
            sab += f[a as usize] * f[b as usize];
        }
        let g = s.solver().green(a, b).unwrap();
        let gaa = s.solver().green(a, a).unwrap();
        let gbb = s.solver().green(b, b).unwrap();
        let sd = ((gaa * gbb + g * g) / reps as f64).sqrt();
        assert!((sab / reps as f64 - g).abs() < 4.0 * sd);
    }

    #[test]
    fn bridge_formula_values() {
        assert!((bridge_positive_probability(1.0, 1.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert_eq!(bridge_positive_probability(-0.1, 1.0), 0.0);
        assert!((cable_open_probability(1.0, 1.0, 0.0) - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn cable_level_set_is_inside_vertex_level_set() {
        let l = LatticeDisk::new(12).unwrap();
        let s = GffSampler::new(&l).unwrap();
        let mut rng = stream(14, 0);
        let phi = s.sample(&mut rng);
        let c = cable_level_set(&l, &phi, 0.1, &mut rng);
        for (k, &(a, b)) in l.interior_edges().iter().enumerate() {
            if c.open_edges[k] {
                assert!(c.vertices.contains(a) && c.vertices.contains(b));
            }
        }
    }

    #[test]
    fn exploration_capacity_grows() {
        let l = LatticeDisk::new(16).unwrap();
        let s = GffSampler::new(&l).unwrap();
        let mut rng = stream(15, 0);
        let phi = s.sample(&mut rng);
        let e = explore(&l, &phi, 0.0, 0.3, true).unwrap();
        for w in e.steps.windows(2) {
            assert!(w[1].capacity >= w[0].capacity - 1e-9);
            assert!(w[1].size > w[0].size);
        }
        assert!(e.stopped.iter().all(|v| phi[v as usize] < 0.0));
    }
}
