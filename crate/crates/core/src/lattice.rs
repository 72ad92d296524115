//! The lattice disk `D_n = (1/n)Z^2 ∩ D`, its boundaries and vertex sets.

use crate::error::{invalid, Error, Result};
use fixedbitset::FixedBitSet;
use serde::Serialize;
use std::f64::consts::PI;

/// Neighbor slots `+x, -x, +y, -y`.
pub const DIRS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Set on a neighbor slot that points at an outer boundary point.
pub const BOUNDARY_FLAG: u32 = 1 << 31;

const NONE: u32 = u32::MAX;

#[inline]
pub fn is_boundary_slot(s: u32) -> bool {
    s & BOUNDARY_FLAG != 0
}

#[inline]
pub fn boundary_index(s: u32) -> usize {
    (s & !BOUNDARY_FLAG) as usize
}

/// Which half of an annulus sector pair to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct LatticeDisk {
    n: u32,
    coords: Vec<(i32, i32)>,
    nbr: Vec<[u32; 4]>,
    grid: Vec<u32>,
    outer: Vec<(i32, i32)>,
    inner: Vec<u32>,
    boundary_edges: Vec<(u32, u32)>,
    interior_edges: Vec<(u32, u32)>,
}

impl LatticeDisk {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > 4096 {
            return invalid(format!("lattice size n={n} must lie in 1..=4096"));
        }
        let ni = n as i32;
        let side = (2 * ni + 1) as usize;
        let inside = |i: i32, j: i32| (i as i64).pow(2) + (j as i64).pow(2) < (ni as i64).pow(2);
        let mut grid = vec![NONE; side * side];
        let slot = |i: i32, j: i32| ((j + ni) as usize) * side + (i + ni) as usize;
        let mut coords = Vec::new();
        for j in -ni..=ni {
            for i in -ni..=ni {
                if inside(i, j) {
                    grid[slot(i, j)] = coords.len() as u32;
                    coords.push((i, j));
                }
            }
        }
        let mut outer = Vec::new();
        let mut nbr = vec![[0u32; 4]; coords.len()];
        let mut boundary_edges = Vec::new();
        let mut interior_edges = Vec::new();
        let mut inner = Vec::new();
        for (v, &(i, j)) in coords.iter().enumerate() {
            let mut on_inner = false;
            for (d, &(di, dj)) in DIRS.iter().enumerate() {
                let (a, b) = (i + di, j + dj);
                let s = slot(a, b);
                if inside(a, b) {
                    let w = grid[s];
                    nbr[v][d] = w;
                    if (v as u32) < w {
                        interior_edges.push((v as u32, w));
                    }
                } else {
                    if grid[s] == NONE {
                        grid[s] = BOUNDARY_FLAG | outer.len() as u32;
                        outer.push((a, b));
                    }
                    nbr[v][d] = grid[s];
                    boundary_edges.push((v as u32, boundary_index(grid[s]) as u32));
                    on_inner = true;
                }
            }
            if on_inner {
                inner.push(v as u32);
            }
        }
        Ok(LatticeDisk { n, coords, nbr, grid, outer, inner, boundary_edges, interior_edges })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, v: u32) -> (i32, i32) {
        self.coords[v as usize]
    }

    pub fn point(&self, v: u32) -> (f64, f64) {
        let (i, j) = self.coords[v as usize];
        (i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    pub fn norm(&self, v: u32) -> f64 {
        let (x, y) = self.point(v);
        x.hypot(y)
    }

    pub fn outer_point(&self, b: usize) -> (f64, f64) {
        let (i, j) = self.outer[b];
        (i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    /// Vertex at integer coordinates, if it lies in `D_n`.
    pub fn index_of(&self, i: i32, j: i32) -> Option<u32> {
        let ni = self.n as i32;
        if i.abs() > ni || j.abs() > ni {
            return None;
        }
        let side = (2 * ni + 1) as usize;
        let s = self.grid[((j + ni) as usize) * side + (i + ni) as usize];
        if s == NONE || is_boundary_slot(s) {
            None
        } else {
            Some(s)
        }
    }

    pub fn nearest_vertex(&self, p: (f64, f64)) -> Option<u32> {
        let n = self.n as f64;
        self.index_of((p.0 * n).round() as i32, (p.1 * n).round() as i32)
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32; 4] {
        &self.nbr[v as usize]
    }

    /// Edges with both endpoints in `D_n`, each listed once.
    pub fn interior_edges(&self) -> &[(u32, u32)] {
        &self.interior_edges
    }

    /// Edges `(vertex, outer point)` between `D_n` and `∂D_n`, with multiplicity.
    pub fn boundary_edges(&self) -> &[(u32, u32)] {
        &self.boundary_edges
    }

    pub fn outer_boundary(&self) -> &[(i32, i32)] {
        &self.outer
    }

    pub fn inner_boundary(&self) -> &[u32] {
        &self.inner
    }

    pub fn inner_boundary_set(&self) -> VertexSet {
        VertexSet::from_iter(self, self.inner.iter().copied())
    }

    pub fn full_set(&self) -> VertexSet {
        let mut s = VertexSet::empty(self);
        s.bits.insert_range(..);
        s
    }

    /// Number of neighbors of `v` on `∂D_n`.
    pub fn boundary_degree(&self, v: u32) -> usize {
        self.nbr[v as usize].iter().filter(|&&s| is_boundary_slot(s)).count()
    }

    /// Closed ball `{x ∈ D_n : |x - c| ≤ r}`; radius zero gives the vertex at `c`.
    pub fn ball_vertices(&self, center: (f64, f64), radius: f64) -> Result<VertexSet> {
        if !(radius >= 0.0) {
            return invalid(format!("ball radius {radius} must be nonnegative"));
        }
        let tol = 1e-12;
        Ok(VertexSet::from_iter(
            self,
            (0..self.len() as u32).filter(|&v| {
                let (x, y) = self.point(v);
                (x - center.0).hypot(y - center.1) <= radius + tol
            }),
        ))
    }

    /// Vertices with `|x| ≥ rho`, the discrete stand-in for `∂B_n(rho)`.
    pub fn outside_radius(&self, rho: f64) -> VertexSet {
        VertexSet::from_iter(self, (0..self.len() as u32).filter(|&v| self.norm(v) >= rho - 1e-12))
    }

    /// Discrete annulus sector `H^{±}_{j,ε}`.
    pub fn annulus_sector(&self, r: f64, r2: f64, eps: f64, side: Side, j: u32) -> Result<VertexSet> {
        if j > 2 {
            return invalid(format!("sector index j={j} must be 0, 1 or 2"));
        }
        if !(0.0 <= r && r < r2 && eps > 0.0 && r2 < 1.0 - eps) {
            return invalid(format!("need 0 <= r < r' < 1 - eps, got r={r} r'={r2} eps={eps}"));
        }
        let jf = j as f64;
        let outer = if j == 0 { 1.0 } else { 1.0 - jf * eps / 2.0 };
        let inner = r + jf * (r2 - r) / 2.0 - 1.0 / self.n as f64;
        let (lo, hi) = match side {
            Side::Plus => (-(2.0 - jf) * PI / 8.0, (10.0 - jf) * PI / 8.0),
            Side::Minus => (-(10.0 - jf) * PI / 8.0, (2.0 - jf) * PI / 8.0),
        };
        Ok(VertexSet::from_iter(
            self,
            (0..self.len() as u32).filter(|&v| {
                let rho = self.norm(v);
                if rho > outer + 1e-12 || rho < inner - 1e-12 {
                    return false;
                }
                let (x, y) = self.point(v);
                let theta = if rho == 0.0 { 0.0 } else { y.atan2(x) };
                (theta - lo).rem_euclid(2.0 * PI) <= hi - lo + 1e-12
            }),
        ))
    }

    /// Vertices of `k` with a neighbor outside `k` (in `D_n` or on `∂D_n`).
    pub fn inner_boundary_of(&self, k: &VertexSet) -> VertexSet {
        VertexSet::from_iter(
            self,
            k.iter().filter(|&v| {
                self.nbr[v as usize].iter().any(|&s| is_boundary_slot(s) || !k.contains(s))
            }),
        )
    }

    /// Vertices of `D_n ∖ k` adjacent to `k`.
    pub fn outer_boundary_of(&self, k: &VertexSet) -> VertexSet {
        let mut out = VertexSet::empty(self);
        for v in k.iter() {
            for &s in &self.nbr[v as usize] {
                if !is_boundary_slot(s) && !k.contains(s) {
                    out.insert(s);
                }
            }
        }
        out
    }

    /// Whether `k` is connected through nearest-neighbor edges.
    pub fn is_connected(&self, k: &VertexSet) -> bool {
        let Some(start) = k.iter().next() else {
            return true;
        };
        let mut seen = VertexSet::empty(self);
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(v) = stack.pop() {
            for &s in &self.nbr[v as usize] {
                if !is_boundary_slot(s) && k.contains(s) && !seen.contains(s) {
                    seen.insert(s);
                    stack.push(s);
                }
            }
        }
        seen.len() == k.len()
    }
}

/// A subset of `D_n` stored as a bitmap over dense vertex indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VertexSet {
    n: u32,
    bits: FixedBitSet,
}

impl VertexSet {
    pub fn empty(lattice: &LatticeDisk) -> Self {
        VertexSet { n: lattice.n, bits: FixedBitSet::with_capacity(lattice.len()) }
    }

    pub fn from_iter(lattice: &LatticeDisk, it: impl IntoIterator<Item = u32>) -> Self {
        let mut s = Self::empty(lattice);
        for v in it {
            s.bits.insert(v as usize);
        }
        s
    }

    pub fn lattice_n(&self) -> u32 {
        self.n
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.bits.contains(v as usize)
    }

    #[inline]
    pub fn insert(&mut self, v: u32) {
        self.bits.insert(v as usize);
    }

    pub fn remove(&mut self, v: u32) {
        self.bits.set(v as usize, false);
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.bits.ones().map(|v| v as u32)
    }

    pub fn check(&self, lattice: &LatticeDisk) -> Result<()> {
        if self.n != lattice.n || self.bits.len() != lattice.len() {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &VertexSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &VertexSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn complement(&self) -> VertexSet {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        VertexSet { n: self.n, bits }
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn n1_and_n2_counts() {
        let l = LatticeDisk::new(1).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.outer_boundary().len(), 4);
        assert_eq!(l.boundary_edges().len(), 4);
        let l = LatticeDisk::new(2).unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l.interior_edges().len(), 12);
        assert_eq!(l.boundary_edges().len(), 12);
        assert_eq!(l.inner_boundary().len(), 8);
    }

    #[test]
    fn zero_n_is_rejected() {
        assert!(LatticeDisk::new(0).is_err());
    }

    #[test]
    fn ball_of_radius_zero_is_origin() {
        let l = LatticeDisk::new(5).unwrap();
        let b = l.ball_vertices((0.0, 0.0), 0.0).unwrap();
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![l.index_of(0, 0).unwrap()]);
    }

    #[test]
    fn sectors_cover_annulus_and_nest() {
        let l = LatticeDisk::new(32).unwrap();
        let (r, r2, eps) = (0.2, 0.4, 0.1);
        let plus = l.annulus_sector(r, r2, eps, Side::Plus, 0).unwrap();
        let minus = l.annulus_sector(r, r2, eps, Side::Minus, 0).unwrap();
        let mut u = plus.clone();
        u.union_with(&minus);
        for v in 0..l.len() as u32 {
            if l.norm(v) >= r {
                assert!(u.contains(v));
            }
        }
        for side in [Side::Plus, Side::Minus] {
            let h0 = l.annulus_sector(r, r2, eps, side, 0).unwrap();
            let h1 = l.annulus_sector(r, r2, eps, side, 1).unwrap();
            let h2 = l.annulus_sector(r, r2, eps, side, 2).unwrap();
            assert!(h2.is_subset(&h1) && h1.is_subset(&h0));
        }
        let a = l.annulus_sector(r, r2, 0.05, Side::Plus, 0).unwrap();
        assert_eq!(a, plus);
        assert!(l.annulus_sector(0.5, 0.4, eps, Side::Plus, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn handshake_identity(n in 1u32..60) {
            let l = LatticeDisk::new(n).unwrap();
            prop_assert_eq!(4 * l.len(), 2 * l.interior_edges().len() + l.boundary_edges().len());
        }

        #[test]
        fn symmetric_under_dihedral_group(n in 1u32..40) {
            let l = LatticeDisk::new(n).unwrap();
            for v in 0..l.len() as u32 {
                let (i, j) = l.coord(v);
                for (a, b) in [(-i, j), (i, -j), (j, i), (-j, -i)] {
                    prop_assert!(l.index_of(a, b).is_some());
                }
            }
        }

        #[test]
        fn inner_boundary_has_outer_neighbor(n in 1u32..40) {
            let l = LatticeDisk::new(n).unwrap();
            for &v in l.inner_boundary() {
                prop_assert!(l.boundary_degree(v) > 0);
            }
            prop_assert_eq!(l.inner_boundary_of(&l.full_set()), l.inner_boundary_set());
        }
    }
}
