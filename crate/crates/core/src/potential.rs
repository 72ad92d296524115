//! Dirichlet Green functions, equilibrium measures and capacities on `D_n`,
//! plus the continuum closed forms they approximate.

use crate::error::{invalid, Error, Result};
use crate::lattice::{is_boundary_slot, LatticeDisk, VertexSet};
use crate::sparse::{conjugate_gradient, nested_dissection, Ldl, SymMatrix};
use lru::LruCache;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    /// Direct factorization below `cg_threshold` vertices, CG above.
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub backend: Backend,
    pub cg_threshold: usize,
    pub cg_tol: f64,
    pub cache_columns: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { backend: Backend::Auto, cg_threshold: 1 << 20, cg_tol: 1e-13, cache_columns: 64 }
    }
}

enum Engine {
    Direct(Ldl),
    Iterative { matrix: SymMatrix, tol: f64 },
}

/// Solves `(4I - A) x = b` on a subset `U ⊆ D_n` with zero data off `U`.
///
/// The inverse of this operator is the Green function `G_U`, normalized so
/// that `4 G_U(x, y)` is the expected number of visits to `y` from `x`.
pub struct DirichletSolver {
    n: u32,
    total: usize,
    domain: Vec<u32>,
    local: Vec<u32>,
    engine: Engine,
    cache: Mutex<LruCache<u32, Arc<Vec<f64>>>>,
}

impl DirichletSolver {
    pub fn full(lattice: &LatticeDisk) -> Result<Self> {
        Self::new(lattice, &lattice.full_set(), SolverOptions::default())
    }

    pub fn new(lattice: &LatticeDisk, domain: &VertexSet, opts: SolverOptions) -> Result<Self> {
        domain.check(lattice)?;
        let verts: Vec<u32> = domain.iter().collect();
        let mut local = vec![NONE; lattice.len()];
        for (k, &v) in verts.iter().enumerate() {
            local[v as usize] = k as u32;
        }
        let matrix = laplacian(lattice, &verts, &local);
        let direct = match opts.backend {
            Backend::Direct => true,
            Backend::Iterative => false,
            Backend::Auto => verts.len() <= opts.cg_threshold,
        };
        let engine = if direct {
            let coords: Vec<(i32, i32)> = verts.iter().map(|&v| lattice.coord(v)).collect();
            Engine::Direct(Ldl::factor(&matrix, &nested_dissection(&coords))?)
        } else {
            Engine::Iterative { matrix, tol: opts.cg_tol }
        };
        let cap = NonZeroUsize::new(opts.cache_columns.max(1)).unwrap();
        Ok(DirichletSolver {
            n: lattice.n(),
            total: lattice.len(),
            domain: verts,
            local,
            engine,
            cache: Mutex::new(LruCache::new(cap)),
        })
    }

    /// Builds the solver with a caller-supplied elimination order over the domain's
    /// vertices (listed as global indices).
    pub fn with_order(lattice: &LatticeDisk, order: &[u32]) -> Result<Self> {
        let domain = VertexSet::from_iter(lattice, order.iter().copied());
        if domain.len() != order.len() {
            return invalid("elimination order repeats a vertex");
        }
        let verts: Vec<u32> = domain.iter().collect();
        let mut local = vec![NONE; lattice.len()];
        for (k, &v) in verts.iter().enumerate() {
            local[v as usize] = k as u32;
        }
        let matrix = laplacian(lattice, &verts, &local);
        let perm: Vec<usize> = order.iter().map(|&v| local[v as usize] as usize).collect();
        let engine = Engine::Direct(Ldl::factor(&matrix, &perm)?);
        Ok(DirichletSolver {
            n: lattice.n(),
            total: lattice.len(),
            domain: verts,
            local,
            engine,
            cache: Mutex::new(LruCache::new(NonZeroUsize::new(1).unwrap())),
        })
    }

    pub fn lattice_n(&self) -> u32 {
        self.n
    }

    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    pub fn contains(&self, v: u32) -> bool {
        self.local[v as usize] != NONE
    }

    pub fn factor(&self) -> Option<&Ldl> {
        match &self.engine {
            Engine::Direct(f) => Some(f),
            Engine::Iterative { .. } => None,
        }
    }

    /// Pivot of each domain vertex (global index) when eliminating in the solver's order.
    pub fn pivots_by_vertex(&self) -> Option<Vec<(u32, f64)>> {
        let f = self.factor()?;
        Some(f.perm().iter().zip(f.pivots()).map(|(&k, &d)| (self.domain[k], d)).collect())
    }

    /// `b` and the result are indexed by global vertex; entries off the domain are ignored / zero.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.total {
            return invalid("right-hand side length differs from the lattice size");
        }
        let rhs: Vec<f64> = self.domain.iter().map(|&v| b[v as usize]).collect();
        let x = match &self.engine {
            Engine::Direct(f) => f.solve(&rhs),
            Engine::Iterative { matrix, tol } => conjugate_gradient(matrix, &rhs, *tol, 20 * rhs.len() + 100)?,
        };
        let mut out = vec![0.0; self.total];
        for (k, &v) in self.domain.iter().enumerate() {
            out[v as usize] = x[k];
        }
        Ok(out)
    }

    /// Column `G_U(·, x)`, cached.
    pub fn green_column(&self, x: u32) -> Result<Arc<Vec<f64>>> {
        if !self.contains(x) {
            return invalid(format!("vertex {x} is outside the solver domain"));
        }
        if let Some(c) = self.cache.lock().unwrap().get(&x) {
            return Ok(c.clone());
        }
        let mut e = vec![0.0; self.total];
        e[x as usize] = 1.0;
        let col = Arc::new(self.solve(&e)?);
        self.cache.lock().unwrap().put(x, col.clone());
        Ok(col)
    }

    pub fn green(&self, x: u32, y: u32) -> Result<f64> {
        if !self.contains(y) {
            return invalid(format!("vertex {y} is outside the solver domain"));
        }
        Ok(self.green_column(x)?[y as usize])
    }

    /// Centered Gaussian vector with covariance `G_U`, from iid standard normals.
    pub fn correlate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let Some(f) = self.factor() else {
            return Err(Error::InvalidParameter("field sampling needs the direct backend".into()));
        };
        let x = f.correlate(z);
        let mut out = vec![0.0; self.total];
        for (k, &v) in self.domain.iter().enumerate() {
            out[v as usize] = x[k];
        }
        Ok(out)
    }
}

fn laplacian(lattice: &LatticeDisk, verts: &[u32], local: &[u32]) -> SymMatrix {
    let mut t = Vec::with_capacity(verts.len() * 5);
    for (k, &v) in verts.iter().enumerate() {
        t.push((k, k, 4.0));
        for &s in lattice.neighbors(v) {
            if !is_boundary_slot(s) && local[s as usize] != NONE {
                t.push((local[s as usize] as usize, k, -1.0));
            }
        }
    }
    SymMatrix::from_triplets(verts.len(), t)
}

/// Equilibrium measure `e_K(x) = 4 P_x(escape to ∂D_n before returning to K)`.
#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pub set: VertexSet,
    /// `(vertex, mass)` for every vertex of `K` with positive mass.
    pub support: Vec<(u32, f64)>,
    pub capacity: f64,
    /// `P_y(reach ∂D_n before K)` for every vertex (zero on `K`).
    pub escape: Vec<f64>,
}

impl EquilibriumMeasure {
    pub fn mass(&self, v: u32) -> f64 {
        self.support.iter().find(|p| p.0 == v).map_or(0.0, |p| p.1)
    }

    /// Dense vector of masses indexed by vertex.
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(v, m) in &self.support {
            out[v as usize] = m;
        }
        out
    }

    pub fn sampler(&self) -> Result<EquilibriumSampler> {
        if self.support.is_empty() {
            return Err(Error::EmptySet);
        }
        let w = WeightedIndex::new(self.support.iter().map(|p| p.1))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(EquilibriumSampler { verts: self.support.iter().map(|p| p.0).collect(), w })
    }
}

/// Draws from the normalized equilibrium measure.
#[derive(Clone, Debug)]
pub struct EquilibriumSampler {
    verts: Vec<u32>,
    w: WeightedIndex<f64>,
}

impl EquilibriumSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.verts[self.w.sample(rng)]
    }
}

pub fn equilibrium_measure(lattice: &LatticeDisk, k: &VertexSet) -> Result<EquilibriumMeasure> {
    equilibrium_measure_with(lattice, k, SolverOptions::default())
}

pub fn equilibrium_measure_with(
    lattice: &LatticeDisk,
    k: &VertexSet,
    opts: SolverOptions,
) -> Result<EquilibriumMeasure> {
    k.check(lattice)?;
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    let rest = k.complement();
    let escape = if rest.is_empty() {
        vec![0.0; lattice.len()]
    } else {
        let solver = DirichletSolver::new(lattice, &rest, opts)?;
        let b: Vec<f64> = (0..lattice.len() as u32).map(|v| lattice.boundary_degree(v) as f64).collect();
        solver.solve(&b)?
    };
    let mut support = Vec::new();
    for x in k.iter() {
        let m: f64 = lattice
            .neighbors(x)
            .iter()
            .map(|&s| if is_boundary_slot(s) { 1.0 } else if k.contains(s) { 0.0 } else { escape[s as usize] })
            .sum();
        if m > 0.0 {
            support.push((x, m));
        }
    }
    let capacity = support.iter().map(|p| p.1).sum();
    Ok(EquilibriumMeasure { set: k.clone(), support, capacity, escape })
}

pub fn capacity(lattice: &LatticeDisk, k: &VertexSet) -> Result<f64> {
    Ok(equilibrium_measure(lattice, k)?.capacity)
}

/// `Σ_y G(x, y) e_K(y)` for every vertex `x`; equals one on `K`.
pub fn last_exit_sums(full: &DirichletSolver, eq: &EquilibriumMeasure) -> Result<Vec<f64>> {
    full.solve(&eq.dense(full.total))
}

/// `e_K^T G e_K`, the variance of the exploration martingale.
pub fn energy(full: &DirichletSolver, eq: &EquilibriumMeasure) -> Result<f64> {
    let e = eq.dense(full.total);
    let g = full.solve(&e)?;
    Ok(e.iter().zip(&g).map(|(a, b)| a * b).sum())
}

/// Largest equilibrium mass of `K ∖ ∂̂K` on its own inner boundary, relative to `cap(K)`.
pub fn es_statistic(lattice: &LatticeDisk, k: &VertexSet) -> Result<f64> {
    let outer = equilibrium_measure(lattice, k)?;
    let mut core = k.clone();
    core.difference_with(&lattice.inner_boundary_of(k));
    if core.is_empty() {
        return Ok(0.0);
    }
    let inner = equilibrium_measure(lattice, &core)?;
    let edge = lattice.inner_boundary_of(&core);
    let sup = inner.support.iter().filter(|p| edge.contains(p.0)).map(|p| p.1).fold(0.0, f64::max);
    Ok(sup / outer.capacity)
}

/// Continuum Dirichlet Green function of the unit disk.
pub fn continuum_green(w: Complex64, z: Complex64) -> Result<f64> {
    if w.norm() >= 1.0 || z.norm() >= 1.0 {
        return invalid("points must lie in the open unit disk");
    }
    if w == z {
        return invalid("Green function is singular on the diagonal");
    }
    Ok(((Complex64::new(1.0, 0.0) - w.conj() * z).norm() / (w - z).norm()).ln() / (2.0 * PI))
}

/// Capacity of `B(r)` relative to the unit disk.
pub fn continuum_capacity_ball(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return invalid(format!("ball radius {r} must lie in (0, 1)"));
    }
    Ok(2.0 * PI / (1.0 / r).ln())
}

/// Probability that planar Brownian motion started at modulus `x` hits `∂B(r)` before `∂B(big_r)`.
pub fn annulus_hit_probability(x: f64, r: f64, big_r: f64) -> Result<f64> {
    if !(0.0 < r && r <= x && x <= big_r) || r == big_r {
        return invalid(format!("need 0 < r <= |x| <= R and r < R, got r={r} |x|={x} R={big_r}"));
    }
    Ok((big_r / x).ln() / (big_r / r).ln())
}

/// A compact set in the closed disk used for capacity-convergence runs.
#[derive(Clone, Copy, Debug)]
pub enum ContinuumSet {
    Ball { radius: f64 },
    /// Horizontal segment `[a, b] × {0}`.
    Segment { a: f64, b: f64 },
}

impl ContinuumSet {
    pub fn discretize(&self, lattice: &LatticeDisk) -> Result<VertexSet> {
        let set = match *self {
            ContinuumSet::Ball { radius } => lattice.ball_vertices((0.0, 0.0), radius)?,
            ContinuumSet::Segment { a, b } => {
                if !(a <= b) {
                    return invalid("segment needs a <= b");
                }
                VertexSet::from_iter(
                    lattice,
                    (0..lattice.len() as u32).filter(|&v| {
                        let (x, y) = lattice.point(v);
                        y == 0.0 && x >= a - 1e-12 && x <= b + 1e-12
                    }),
                )
            }
        };
        self.check_hypothesis(lattice, &set)?;
        Ok(set)
    }

    /// Checks that every point of the continuum set lies within `2/n` of its discretization.
    fn check_hypothesis(&self, lattice: &LatticeDisk, set: &VertexSet) -> Result<()> {
        let n = lattice.n() as f64;
        let pts: Vec<(f64, f64)> = set.iter().map(|v| lattice.point(v)).collect();
        let probe: Vec<(f64, f64)> = match *self {
            ContinuumSet::Ball { radius } => (0..720)
                .flat_map(|k| {
                    let t = k as f64 * PI / 360.0;
                    [0.0, 0.5, 1.0].map(|s| (s * radius * t.cos(), s * radius * t.sin()))
                })
                .collect(),
            ContinuumSet::Segment { a, b } => (0..=400).map(|k| (a + (b - a) * k as f64 / 400.0, 0.0)).collect(),
        };
        for p in probe {
            let d = pts.iter().map(|q| (p.0 - q.0).hypot(p.1 - q.1)).fold(f64::INFINITY, f64::min);
            if d > 2.0 / n {
                return Err(Error::Hypothesis(format!(
                    "point ({:.4}, {:.4}) is {d:.4} from the discretized set, above 2/n",
                    p.0, p.1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CapacityPoint {
    pub n: u32,
    pub capacity: f64,
}

pub fn capacity_sequence(set: ContinuumSet, ns: &[u32]) -> Result<Vec<CapacityPoint>> {
    ns.iter()
        .map(|&n| {
            let l = LatticeDisk::new(n)?;
            let k = set.discretize(&l)?;
            Ok(CapacityPoint { n, capacity: capacity(&l, &k)? })
        })
        .collect()
}
