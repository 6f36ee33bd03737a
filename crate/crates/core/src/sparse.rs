//! Compressed sparse row matrices and an envelope Cholesky factorization for
//! Hermitian positive definite systems.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// CSR matrix with columns sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Zero + Add<Output = T>> CsrMatrix<T> {
    /// Duplicates are summed in insertion order, so assembly is reproducible.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(r < rows && c < cols, "triplet out of bounds");
            if last == Some((r, c)) {
                let x = values.last_mut().expect("nonempty");
                *x = *x + v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mul_vec<X>(&self, x: &[X]) -> Vec<X>
    where
        X: Copy + Zero + Add<Output = X>,
        T: Mul<X, Output = X>,
    {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).fold(X::zero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl CsrMatrix<Complex64> {
    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Complex matrix-vector product.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.mul_vec(x)
    }

    /// `A + shift * diag(d)`.
    pub fn plus_diagonal(&self, d: &[f64], shift: f64) -> CsrMatrix<Complex64> {
        let mut trip: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.nnz() + self.rows);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                trip.push((r, c, v));
            }
            trip.push((r, r, Complex64::new(shift * d[r], 0.0)));
        }
        CsrMatrix::from_triplets(self.rows, self.cols, &trip)
    }

    /// `diag(d) + s * A`.
    pub fn scaled_plus_diagonal(&self, s: f64, d: &[f64]) -> CsrMatrix<Complex64> {
        let mut trip: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.nnz() + self.rows);
        for r in 0..self.rows {
            trip.push((r, r, Complex64::new(d[r], 0.0)));
            for (c, v) in self.row(r) {
                trip.push((r, c, v * s));
            }
        }
        CsrMatrix::from_triplets(self.rows, self.cols, &trip)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Copy + Zero + Add<Output = T>>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.rows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(|v| v.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (eccentricity, a node of the last level with minimum degree)
        let mut seen = visited.to_vec();
        let mut frontier = vec![start];
        seen[start] = true;
        let mut depth = 0;
        let mut last = frontier.clone();
        while !frontier.is_empty() {
            last = frontier.clone();
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if !next.is_empty() {
                depth += 1;
            }
            frontier = next;
        }
        let far = *last.iter().min_by_key(|&&u| (degree[u], u)).expect("nonempty level");
        (depth, far)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start (George-Liu)
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let mut queue = VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A P^T = L L^H` with `P` a reverse Cuthill-McKee permutation and `L`
/// stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<Complex64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix<Complex64>) -> Result<Self> {
        let n = a.rows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_r in 0..n {
            let r = inv[old_r];
            for (old_c, _) in a.row(old_r) {
                let c = inv[old_c];
                if c < r {
                    first[r] = first[r].min(c);
                } else if r < c {
                    first[c] = first[c].min(r);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); offset[n]];
        // lower triangle of the permuted matrix, row-wise
        for old_r in 0..n {
            let r = inv[old_r];
            for (old_c, v) in a.row(old_r) {
                let c = inv[old_c];
                if c <= r {
                    data[offset[r] + (c - first[r])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let ri = &data[offset[i] + (k0 - fi)..offset[i] + (j - fi)];
                let rj = &data[offset[j] + (k0 - fj)..offset[j] + (j - fj)];
                let mut s = data[offset[i] + (j - fi)];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y.conj();
                }
                let ljj = data[offset[j] + (j - fj)].re;
                data[offset[i] + (j - fi)] = s / ljj;
            }
            let row = &data[offset[i]..offset[i] + (i - fi)];
            let d = data[offset[i] + (i - fi)].re - row.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite(perm[i]));
            }
            data[offset[i] + (i - fi)] = Complex64::new(d.sqrt(), 0.0);
        }
        Ok(EnvelopeCholesky { n, perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i] + (i - fi)];
            let mut s = y[i];
            for (l, x) in row.iter().zip(&y[fi..i]) {
                s -= l * x;
            }
            y[i] = s / self.data[self.offset[i] + (i - fi)].re;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] / self.data[self.offset[i] + (i - fi)].re;
            y[i] = xi;
            let row = &self.data[self.offset[i]..self.offset[i] + (i - fi)];
            for (l, yk) in row.iter().zip(y[fi..i].iter_mut()) {
                *yk -= l.conj() * xi;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        // tridiagonal-ish Hermitian PD matrix with a long-range coupling
        let n = 9;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(4.0 + i as f64 * 0.1, 0.0)));
            if i + 1 < n {
                let z = c(-1.0, 0.3 * i as f64 / n as f64);
                t.push((i, i + 1, z));
                t.push((i + 1, i, z.conj()));
            }
        }
        t.push((0, 7, c(0.5, 0.5)));
        t.push((7, 0, c(0.5, -0.5)));
        let a = CsrMatrix::from_triplets(n, n, &t);
        assert_eq!(a.hermitian_defect(), 0.0);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64 * 0.2)).collect();
        let x = chol.solve(&b);
        let r = a.apply(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(1.0, 0.0))]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0));
            t.push((i, (i * 7 + 3) % n, 1.0));
            t.push(((i * 7 + 3) % n, i, 1.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}
