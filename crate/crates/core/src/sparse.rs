//! Sparse symmetric matrices, an up-looking LDL^T factorization and a
//! conjugate-gradient fallback.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Symmetric matrix in compressed-column form holding both triangles.
#[derive(Clone, Debug)]
pub struct SymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SymMatrix {
    /// Builds from `(row, col, value)` entries of the full pattern.
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(i, j, _)| (j, i));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = (NONE, NONE);
        for (i, j, v) in entries {
            if (i, j) == last {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = (i, j);
            row_idx.push(i);
            vals.push(v);
            col_ptr[j + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        SymMatrix { n, col_ptr, row_idx, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.col(j).map(|(i, v)| v * x[i]).sum();
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.col(j).filter(|&(i, _)| i == j).map(|(_, v)| v).sum()).collect()
    }
}

/// `P A P^T = L D L^T` with unit lower-triangular `L`.
#[derive(Clone, Debug)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    /// Factors `a` eliminating rows in the order `perm[0], perm[1], ...`.
    pub fn factor(a: &SymMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.n;
        if perm.len() != n {
            return Err(Error::Factorization("permutation length mismatch".into()));
        }
        let mut pinv = vec![NONE; n];
        for (k, &p) in perm.iter().enumerate() {
            if p >= n || pinv[p] != NONE {
                return Err(Error::Factorization("not a permutation".into()));
            }
            pinv[p] = k;
        }
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for (row, _) in a.col(perm[k]) {
                let mut i = pinv[row];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.fill(NONE);
        lnz.fill(0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (row, v) in a.col(perm[k]) {
                let mut i = pinv[row];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                li[p2] = k;
                lx[p2] = lki;
                lnz[i] += 1;
                top += 1;
            }
            if !(d[k] > 0.0) {
                return Err(Error::Factorization(format!("nonpositive pivot {} at step {k}", d[k])));
            }
        }
        Ok(Ldl { n, perm: perm.to_vec(), lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Pivots in elimination order: `pivots()[k]` belongs to row `perm[k]`.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    fn lsolve(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
    }

    fn ltsolve(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.lsolve(&mut x);
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        self.ltsolve(&mut x);
        let mut out = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }

    /// Maps iid standard normals to a centered Gaussian vector with covariance `A^{-1}`.
    pub fn correlate(&self, z: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = z.iter().zip(&self.d).map(|(zi, di)| zi / di.sqrt()).collect();
        self.ltsolve(&mut x);
        let mut out = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

/// Geometric nested dissection for vertices of the square grid.
/// Returns an elimination order (separators last).
pub fn nested_dissection(coords: &[(i32, i32)]) -> Vec<usize> {
    let mut order = Vec::with_capacity(coords.len());
    let idx: Vec<usize> = (0..coords.len()).collect();
    dissect(coords, idx, &mut order);
    order
}

fn dissect(coords: &[(i32, i32)], idx: Vec<usize>, order: &mut Vec<usize>) {
    if idx.len() <= 48 {
        order.extend(idx);
        return;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for &v in &idx {
        let (x, y) = coords[v];
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let key = |v: usize| if x1 - x0 >= y1 - y0 { coords[v].0 } else { coords[v].1 };
    let mut keys: Vec<i32> = idx.iter().map(|&v| key(v)).collect();
    let mid = keys.len() / 2;
    let m = *keys.select_nth_unstable(mid).1;
    let (mut lo, mut sep, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    for v in idx {
        match key(v).cmp(&m) {
            std::cmp::Ordering::Less => lo.push(v),
            std::cmp::Ordering::Equal => sep.push(v),
            std::cmp::Ordering::Greater => hi.push(v),
        }
    }
    if lo.is_empty() && hi.is_empty() {
        order.extend(sep);
        return;
    }
    dissect(coords, lo, order);
    dissect(coords, hi, order);
    order.extend(sep);
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(a: &SymMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let dinv: Vec<f64> = a.diag().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NoConvergence(max_iter))
}
