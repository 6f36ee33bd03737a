//! Generalized eigenbases `L Φ = M Φ Σ` and vector heat diffusion.
//!
//! Small problems are solved densely through the symmetric reduction
//! `M^{-1/2} L M^{-1/2}`. Larger ones use a shift-invert block Lanczos
//! iteration in the `M` inner product with full reorthogonalization and a
//! Rayleigh-Ritz extraction against `L`. Both paths pass the same residual
//! check before a basis is returned.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen_with;
use crate::ops::{ConnectionLaplacian, MassMatrix};
use crate::sparse::{CsrMatrix, EnvelopeCholesky};

/// Default number of modes.
pub const DEFAULT_K: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Problems up to this size are solved densely.
    pub dense_max: usize,
    /// Block width of the Lanczos iteration.
    pub block_size: usize,
    /// Accept when `‖L φ − λ M φ‖_{M⁻¹} ≤ tolerance · λ_max` for every mode.
    pub tolerance: f64,
    /// Relative gap below which consecutive eigenvalues count as one cluster.
    pub cluster_tolerance: f64,
    /// Extend `k` so a degenerate eigenspace is never split.
    pub complete_clusters: bool,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            dense_max: 1000,
            block_size: 8,
            tolerance: 1e-6,
            cluster_tolerance: 1e-8,
            complete_clusters: true,
            seed: 0x5eed,
        }
    }
}

/// `k` lowest eigenpairs, `M`-orthonormal, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    /// `n x k`, column `i` is eigenvector `i`.
    pub vectors: CMat,
    pub values: Vec<f64>,
    /// Fingerprint of the frame the operator was built from (0 if untagged).
    pub source: u64,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.rows()
    }

    pub fn tagged(mut self, source: u64) -> Self {
        self.source = source;
        self
    }

    /// `‖L φ_i − λ_i M φ_i‖_{M⁻¹}` for every mode.
    pub fn residuals(&self, l: &CsrMatrix<Complex64>, mass: &MassMatrix) -> Vec<f64> {
        (0..self.k())
            .map(|i| {
                let phi = self.vectors.col(i);
                let lphi = l.apply(&phi);
                lphi.iter()
                    .zip(&phi)
                    .zip(&mass.diag)
                    .map(|((a, p), m)| (a - p * (self.values[i] * m)).norm_sqr() / m)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Upper bound on the largest eigenvalue of the pencil (Gershgorin on `M⁻¹ L`).
pub fn spectral_radius_bound(l: &CsrMatrix<Complex64>, mass: &MassMatrix) -> f64 {
    (0..l.rows())
        .map(|r| l.row(r).map(|(_, v)| v.norm()).sum::<f64>() / mass.diag[r])
        .fold(0.0, f64::max)
}

/// Eigenbasis of the connection Laplacian, tagged with its frame.
pub fn solve_connection_basis(
    lap: &ConnectionLaplacian,
    mass: &MassMatrix,
    k: usize,
    config: &EigenConfig,
) -> Result<SpectralBasis> {
    Ok(solve_eigenbasis(&lap.matrix, mass, k, config)?.tagged(lap.frame_fingerprint()))
}

pub fn solve_eigenbasis(
    l: &CsrMatrix<Complex64>,
    mass: &MassMatrix,
    k: usize,
    config: &EigenConfig,
) -> Result<SpectralBasis> {
    let n = l.rows();
    if mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mass.len() });
    }
    if k > n {
        return Err(Error::TooManyModes { k, n });
    }
    if k == 0 {
        return Ok(SpectralBasis { vectors: CMat::zeros(n, 0), values: Vec::new(), source: 0 });
    }
    let scale = spectral_radius_bound(l, mass);
    let (mut values, mut vectors) = if n <= config.dense_max {
        dense_solve(l, mass, k, config, scale)?
    } else {
        lanczos_solve(l, mass, k, config, scale)?
    };
    let top = values.last().copied().unwrap_or(0.0).abs().max(scale * f64::EPSILON);
    for v in values.iter_mut() {
        if *v < -1e-8 * top {
            return Err(Error::NoConvergence { residual: -*v, tolerance: 1e-8 * top });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    fix_phases(&mut vectors);
    let basis = SpectralBasis { vectors, values, source: 0 };
    let worst = basis.residuals(l, mass).into_iter().fold(0.0, f64::max);
    let tol = config.tolerance * scale;
    if !(worst <= tol) {
        return Err(Error::NoConvergence { residual: worst, tolerance: tol });
    }
    Ok(basis)
}

fn cluster_end(values: &[f64], k: usize, config: &EigenConfig, scale: f64) -> usize {
    let mut k_eff = k.min(values.len());
    if config.complete_clusters {
        while k_eff < values.len() {
            let gap = values[k_eff] - values[k_eff - 1];
            let tol = config.cluster_tolerance * values[k_eff - 1].abs().max(1e-10 * scale);
            if gap > tol {
                break;
            }
            k_eff += 1;
        }
    }
    k_eff
}

fn dense_solve(
    l: &CsrMatrix<Complex64>,
    mass: &MassMatrix,
    k: usize,
    config: &EigenConfig,
    scale: f64,
) -> Result<(Vec<f64>, CMat)> {
    let n = l.rows();
    let inv_sqrt: Vec<f64> = mass.diag.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = CMat::zeros(n, n);
    for r in 0..n {
        for (c, v) in l.row(r) {
            a[(r, c)] = v * (inv_sqrt[r] * inv_sqrt[c]);
        }
    }
    // exact symmetrization guards against rounding in the assembled input
    for r in 0..n {
        a[(r, r)] = Complex64::new(a[(r, r)].re, 0.0);
        for c in 0..r {
            let z = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            a[(r, c)] = z;
            a[(c, r)] = z.conj();
        }
    }
    let eig = hermitian_eigen_with(&a, |values| cluster_end(values, k, config, scale))?;
    let k_eff = eig.vectors.cols();
    let mut vectors = eig.vectors;
    for r in 0..n {
        for z in vectors.row_mut(r) {
            *z *= inv_sqrt[r];
        }
    }
    Ok((eig.values[..k_eff].to_vec(), vectors))
}

#[cfg(test)]
fn m_dot(mass: &[f64], x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).zip(mass).map(|((a, b), m)| a.conj() * b * *m).sum()
}

fn m_norm(mass: &[f64], x: &[Complex64]) -> f64 {
    x.iter().zip(mass).map(|(a, m)| a.norm_sqr() * m).sum::<f64>().sqrt()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Orthogonalize `w` against `basis` and normalize in the `M` inner product.
/// A second Gram-Schmidt pass runs only when the first one cancelled most of
/// `w`. Returns `false` if `w` collapses.
fn orthonormalize_against(mass: &[f64], basis: &[Vec<Complex64>], w: &mut [Complex64]) -> bool {
    let before = m_norm(mass, w);
    if before == 0.0 {
        return false;
    }
    let mut current = before;
    for _ in 0..2 {
        let mw: Vec<Complex64> = w.iter().zip(mass).map(|(z, m)| z * *m).collect();
        let coeffs: Vec<Complex64> = basis.iter().map(|v| dot_plain(v, &mw)).collect();
        for (v, c) in basis.iter().zip(&coeffs) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= vi * c;
            }
        }
        let after = m_norm(mass, w);
        if after > 0.7 * current {
            current = after;
            break;
        }
        current = after;
    }
    if !(current > 1e-10 * before) {
        return false;
    }
    for wi in w.iter_mut() {
        *wi /= current;
    }
    true
}

fn lanczos_solve(
    l: &CsrMatrix<Complex64>,
    mass: &MassMatrix,
    k: usize,
    config: &EigenConfig,
    scale: f64,
) -> Result<(Vec<f64>, CMat)> {
    let n = l.rows();
    let m = &mass.diag;
    let mean_ratio = (0..n).map(|r| l.get(r, r).re / m[r]).sum::<f64>() / n as f64;
    let shift = 1e-4 * mean_ratio.max(f64::MIN_POSITIVE);
    let chol = EnvelopeCholesky::factor(&l.plus_diagonal(m, shift))?;
    let b = config.block_size.max(1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tol = config.tolerance * scale;

    let mut space = KrylovSpace::new(n);
    let start: Vec<Vec<Complex64>> = (0..b).map(|_| random_vector(&mut rng, n)).collect();
    space.extend(l, m, start, &mut rng);

    let mut last_block_start = 0;
    let mut last_check = 0;
    let mut extra = b;
    let mut worst = f64::INFINITY;
    loop {
        let dim = space.dim();
        let exhausted = dim >= n;
        if dim >= (k + extra).min(n) && (exhausted || last_check == 0 || dim - last_check >= (2 * b).max(dim / 6)) {
            last_check = dim;
            let h = CMat::from_fn(dim, dim, |i, j| space.h(i, j));
            let mut k_eff = k;
            let eig = hermitian_eigen_with(&h, |values| {
                k_eff = cluster_end(values, k, config, scale);
                (k_eff + 1).min(dim)
            })?;
            let cols = eig.vectors.cols();
            // ‖L x − λ M x‖²_{M⁻¹} = yᴴ G y − λ² for an M-orthonormal basis
            worst = 0.0;
            for c in 0..k_eff.min(cols) {
                let y = eig.vectors.col(c);
                let lam = eig.values[c];
                let mut quad = 0.0;
                for i in 0..dim {
                    let mut gy = Complex64::new(0.0, 0.0);
                    for j in 0..dim {
                        gy += space.g(i, j) * y[j];
                    }
                    quad += (y[i].conj() * gy).re;
                }
                worst = worst.max((quad - lam * lam).max(0.0).sqrt());
            }
            let clusters_fit = k_eff < cols || exhausted;
            if clusters_fit && (worst <= 0.1 * tol || (exhausted && worst <= tol)) {
                let y = eig.vectors.col_block(0, k_eff);
                return Ok((eig.values[..k_eff].to_vec(), space.combine(&y)));
            }
            if exhausted {
                return Err(Error::NoConvergence { residual: worst, tolerance: tol });
            }
            if !clusters_fit {
                extra += b;
            }
        }
        if exhausted {
            return Err(Error::NoConvergence { residual: worst, tolerance: tol });
        }
        // next block: (L + shift M)⁻¹ M V_last
        let block: Vec<Vec<Complex64>> = space.basis[last_block_start..]
            .iter()
            .map(|v| {
                let mv: Vec<Complex64> = v.iter().zip(m).map(|(a, w)| a * *w).collect();
                chol.solve(&mv)
            })
            .collect();
        last_block_start = space.dim();
        space.extend(l, m, block, &mut rng);
        if space.dim() == last_block_start {
            // invariant subspace: continue from fresh random directions
            let fresh: Vec<Vec<Complex64>> = (0..b).map(|_| random_vector(&mut rng, n)).collect();
            space.extend(l, m, fresh, &mut rng);
            if space.dim() == last_block_start {
                return Err(Error::NoConvergence { residual: worst, tolerance: tol });
            }
        }
    }
}

/// An M-orthonormal Krylov basis `V` with the projections `Vᴴ L V` and
/// `(L V)ᴴ M⁻¹ (L V)` kept up to date as columns are added.
struct KrylovSpace {
    n: usize,
    basis: Vec<Vec<Complex64>>,
    /// `M⁻¹ L v` per basis vector
    scaled_images: Vec<Vec<Complex64>>,
    /// lower triangles, row `j` holds entries `(j, 0..=j)`
    h_rows: Vec<Vec<Complex64>>,
    g_rows: Vec<Vec<Complex64>>,
}

impl KrylovSpace {
    fn new(n: usize) -> Self {
        KrylovSpace { n, basis: Vec::new(), scaled_images: Vec::new(), h_rows: Vec::new(), g_rows: Vec::new() }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn h(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            self.h_rows[i][j]
        } else {
            self.h_rows[j][i].conj()
        }
    }

    fn g(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            self.g_rows[i][j]
        } else {
            self.g_rows[j][i].conj()
        }
    }

    fn extend(&mut self, l: &CsrMatrix<Complex64>, m: &[f64], block: Vec<Vec<Complex64>>, rng: &mut ChaCha8Rng) {
        for mut w in block {
            if self.dim() >= self.n {
                return;
            }
            let mut accepted = orthonormalize_against(m, &self.basis, &mut w);
            let mut tries = 0;
            while !accepted && tries < 5 {
                w = random_vector(rng, self.n);
                accepted = orthonormalize_against(m, &self.basis, &mut w);
                tries += 1;
            }
            if !accepted {
                continue;
            }
            let lw = l.apply(&w);
            let scaled: Vec<Complex64> = lw.iter().zip(m).map(|(z, mi)| z / *mi).collect();
            // H(j, i) = <v_j, L v_i> = <L v_j, v_i>, G(j, i) = <L v_j, M⁻¹ L v_i>
            let mut h_row: Vec<Complex64> = self.basis.iter().map(|v| dot_plain(&lw, v)).collect();
            h_row.push(Complex64::new(dot_plain(&w, &lw).re, 0.0));
            let mut g_row: Vec<Complex64> = self.scaled_images.iter().map(|s| dot_plain(&lw, s)).collect();
            g_row.push(Complex64::new(dot_plain(&lw, &scaled).re, 0.0));
            self.h_rows.push(h_row);
            self.g_rows.push(g_row);
            self.basis.push(w);
            self.scaled_images.push(scaled);
        }
    }

    /// `V y` for a `dim x c` coefficient block.
    fn combine(&self, y: &CMat) -> CMat {
        let c = y.cols();
        let mut x = CMat::zeros(self.n, c);
        for (j, v) in self.basis.iter().enumerate() {
            let yrow = y.row(j);
            for (r, vr) in v.iter().enumerate() {
                for (xc, yc) in x.row_mut(r).iter_mut().zip(yrow) {
                    *xc += vr * yc;
                }
            }
        }
        x
    }
}

fn dot_plain(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Make the largest-magnitude entry of every column real and positive.
fn fix_phases(vectors: &mut CMat) {
    for c in 0..vectors.cols() {
        let col = vectors.col(c);
        let mut best = 0;
        let mut best_mag = -1.0;
        for (r, z) in col.iter().enumerate() {
            if z.norm() > best_mag * (1.0 + 1e-12) {
                best = r;
                best_mag = z.norm();
            }
        }
        if best_mag > 0.0 {
            let phase = col[best].conj() / best_mag;
            let fixed: Vec<Complex64> = col.iter().map(|z| z * phase).collect();
            vectors.set_col(c, &fixed);
        }
    }
}

/// `u' = Φ (e^{−λ s} ⊙ (Φᴴ M u))`. `times` holds one shared time or one per
/// column of `u`.
pub fn spectral_diffuse(basis: &SpectralBasis, mass: &MassMatrix, u: &CMat, times: &[f64]) -> Result<CMat> {
    let (n, c) = (u.rows(), u.cols());
    if n != basis.n() || mass.len() != n {
        return Err(Error::DimensionMismatch { expected: basis.n(), found: n });
    }
    if times.len() != 1 && times.len() != c {
        return Err(Error::DimensionMismatch { expected: c, found: times.len() });
    }
    if let Some(&s) = times.iter().find(|&&s| !(s >= 0.0)) {
        return Err(Error::NegativeTime(s));
    }
    let coeffs = project(basis, mass, u);
    let k = basis.k();
    let mut scaled = coeffs;
    for a in 0..k {
        let row = scaled.row_mut(a);
        for (col, z) in row.iter_mut().enumerate() {
            let s = if times.len() == 1 { times[0] } else { times[col] };
            *z *= (-basis.values[a] * s).exp();
        }
    }
    Ok(reconstruct(basis, &scaled))
}

/// Spectral coefficients `Φᴴ M u` (`k x c`).
pub fn project(basis: &SpectralBasis, mass: &MassMatrix, u: &CMat) -> CMat {
    let (k, c) = (basis.k(), u.cols());
    let mut out = CMat::zeros(k, c);
    let mut mu = vec![Complex64::new(0.0, 0.0); c];
    for v in 0..u.rows() {
        for (dst, src) in mu.iter_mut().zip(u.row(v)) {
            *dst = src * mass.diag[v];
        }
        let phi = basis.vectors.row(v);
        for a in 0..k {
            let w = phi[a].conj();
            let row = out.row_mut(a);
            for (o, x) in row.iter_mut().zip(&mu) {
                *o += w * x;
            }
        }
    }
    out
}

/// `Φ coeffs` (`n x c`).
pub fn reconstruct(basis: &SpectralBasis, coeffs: &CMat) -> CMat {
    let (n, k, c) = (basis.n(), basis.k(), coeffs.cols());
    let mut out = CMat::zeros(n, c);
    for v in 0..n {
        let phi = basis.vectors.row(v);
        let row = out.row_mut(v);
        for a in 0..k {
            let w = phi[a];
            for (o, x) in row.iter_mut().zip(coeffs.row(a)) {
                *o += w * x;
            }
        }
    }
    out
}

/// One implicit Euler step: solves `(M + s L) u' = M u` column by column.
pub fn direct_diffuse(l: &CsrMatrix<Complex64>, mass: &MassMatrix, u: &CMat, s: f64) -> Result<CMat> {
    let n = l.rows();
    if u.rows() != n || mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.rows() });
    }
    if !(s >= 0.0) {
        return Err(Error::NegativeTime(s));
    }
    let system = l.scaled_plus_diagonal(s, &mass.diag);
    let chol = EnvelopeCholesky::factor(&system)?;
    let mut out = CMat::zeros(n, u.cols());
    for c in 0..u.cols() {
        let rhs: Vec<Complex64> = u.col(c).iter().zip(&mass.diag).map(|(z, m)| z * *m).collect();
        out.set_col(c, &chol.solve(&rhs));
    }
    Ok(out)
}

/// `‖u‖_M` of every column.
pub fn mass_norms(mass: &MassMatrix, u: &CMat) -> Vec<f64> {
    (0..u.cols()).map(|c| m_norm(&mass.diag, &u.col(c))).collect()
}
