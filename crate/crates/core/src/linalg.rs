//! Dense Hermitian eigensolver: Householder reduction to a real symmetric
//! tridiagonal matrix followed by implicit QL iterations.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::cmat::CMat;
use crate::error::{Error, Result};

/// Eigenvalues (ascending) and the eigenvectors of the `select` smallest
/// ones, stored as the columns of an `n x select` matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

struct Reflector {
    v: Vec<Complex64>,
    tau: f64,
}

/// Eigen-decomposition of the Hermitian matrix `a` (only numerically
/// Hermitian input is meaningful; the lower triangle drives the reduction).
pub fn hermitian_eigen(a: &CMat, select: usize) -> Result<HermitianEigen> {
    let n = a.rows();
    if select > n {
        return Err(Error::TooManyModes { k: select, n });
    }
    hermitian_eigen_with(a, |_| select)
}

/// Like [`hermitian_eigen`], with the number of eigenvectors chosen from the
/// sorted eigenvalues (clamped to the dimension).
pub fn hermitian_eigen_with(a: &CMat, select: impl FnOnce(&[f64]) -> usize) -> Result<HermitianEigen> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "hermitian_eigen: matrix must be square");
    if n == 0 {
        return Ok(HermitianEigen { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let mut w = a.clone();
    let mut reflectors: Vec<Option<Reflector>> = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for j in 0..n.saturating_sub(2) {
        let m = n - j - 1;
        let x: Vec<Complex64> = (j + 1..n).map(|r| w[(r, j)]).collect();
        let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail == 0.0 {
            reflectors.push(None);
            continue;
        }
        let xnorm = (x[0].norm_sqr() + tail).sqrt();
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;
        // p = tau * A22 v
        for r in 0..m {
            let row = &w.row(j + 1 + r)[j + 1..];
            let mut s = Complex64::new(0.0, 0.0);
            for (aa, vv) in row.iter().zip(&v) {
                s += aa * vv;
            }
            p[r] = s * tau;
        }
        let vhp: Complex64 = v.iter().zip(&p[..m]).map(|(vv, pp)| vv.conj() * pp).sum();
        let k = 0.5 * tau * vhp.re;
        let wv: Vec<Complex64> = (0..m).map(|r| p[r] - v[r] * k).collect();
        for r in 0..m {
            let (vr, wr) = (v[r], wv[r]);
            let row = &mut w.row_mut(j + 1 + r)[j + 1..];
            for c in 0..m {
                row[c] -= vr * wv[c].conj() + wr * v[c].conj();
            }
        }
        w[(j + 1, j)] = alpha;
        w[(j, j + 1)] = alpha.conj();
        for r in j + 2..n {
            w[(r, j)] = Complex64::new(0.0, 0.0);
            w[(j, r)] = Complex64::new(0.0, 0.0);
        }
        reflectors.push(Some(Reflector { v, tau }));
    }

    let mut d: Vec<f64> = (0..n).map(|i| w[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut phase = vec![Complex64::new(1.0, 0.0); n];
    for j in 0..n - 1 {
        let beta = w[(j + 1, j)];
        let mag = beta.norm();
        e[j] = mag;
        phase[j + 1] = if mag > 0.0 { phase[j] * (beta / mag) } else { phase[j] };
    }
    drop(w);

    // rows of z are eigenvectors of the real tridiagonal matrix
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let select = select(&values).min(n);

    let mut vectors = CMat::zeros(n, select);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (col, &src) in order.iter().take(select).enumerate() {
        for i in 0..n {
            x[i] = phase[i] * z[src * n + i];
        }
        for (j, refl) in reflectors.iter().enumerate().rev() {
            if let Some(Reflector { v, tau }) = refl {
                let seg = &mut x[j + 1..];
                let s: Complex64 = v.iter().zip(seg.iter()).map(|(vv, xx)| vv.conj() * xx).sum();
                let s = s * *tau;
                for (xx, vv) in seg.iter_mut().zip(v) {
                    *xx -= vv * s;
                }
            }
        }
        vectors.set_col(col, &x);
    }
    Ok(HermitianEigen { values, vectors })
}

/// Implicit QL on the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i + 1`, `e[n-1]` ignored).
/// Rotations are accumulated into the rows of `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence { residual: e[l].abs(), tolerance: eps * tst1 });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let t = zi1[k];
                        zi1[k] = s * zi[k] + c * t;
                        zi[k] = c * zi[k] - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
