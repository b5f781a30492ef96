//! Dense linear algebra helpers built on `faer`.
//!
//! faer supplies LU, products and eigenvalues. The routines here cover what
//! it does not expose at a convenient level: Hessenberg-based shifted solves
//! for frequency sweeps, a complex Schur form for Bartels-Stewart Lyapunov
//! solves, the Padé matrix exponential and the orthogonal staircase used
//! by minimal realization.

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = Mat<f64>;
pub type CMat = Mat<Complex64>;

pub fn identity(n: usize) -> RMat {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

pub fn to_complex(a: &RMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| Complex64::new(a[(i, j)], 0.0))
}

pub fn frobenius(a: &RMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.norm_l2()
}

/// Maximum absolute column sum.
pub fn norm1(a: &RMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<RMat> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn to_rows(a: &RMat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn eigenvalues(a: &RMat) -> Result<Vec<Complex64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.nrows() == 1 {
        return Ok(vec![Complex64::new(a[(0, 0)], 0.0)]);
    }
    if (0..a.nrows()).any(|i| (0..a.ncols()).any(|j| !a[(i, j)].is_finite())) {
        return Err(Error::Linalg("non-finite matrix entry".into()));
    }
    a.eigenvalues()
        .map_err(|e| Error::Linalg(format!("eigenvalue iteration failed: {e:?}")))
}

/// Largest real part of the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(a: &RMat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn solve(a: &RMat, b: &RMat) -> RMat {
    a.partial_piv_lu().solve(b)
}

/// Householder vector for `x`: returns `(v, beta)` with `v[0] = 1` so that
/// `(I - beta v v^T) x = (alpha, 0, ..., 0)`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        return (v, 0.0, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    let v0 = x[0] - alpha;
    for vi in v.iter_mut() {
        *vi /= v0;
    }
    v[0] = 1.0;
    let beta = -v0 / alpha;
    (v, beta, alpha)
}

/// Applies `I - beta v v^T` (acting on indices `off..off+v.len()`) from the left.
fn reflect_rows(m: &mut RMat, v: &[f64], beta: f64, off: usize) {
    if beta == 0.0 {
        return;
    }
    for j in 0..m.ncols() {
        let mut s = 0.0;
        for (i, vi) in v.iter().enumerate() {
            s += vi * m[(off + i, j)];
        }
        s *= beta;
        if s != 0.0 {
            for (i, vi) in v.iter().enumerate() {
                m[(off + i, j)] -= s * vi;
            }
        }
    }
}

/// Applies `I - beta v v^T` from the right.
fn reflect_cols(m: &mut RMat, v: &[f64], beta: f64, off: usize) {
    if beta == 0.0 {
        return;
    }
    for i in 0..m.nrows() {
        let mut s = 0.0;
        for (j, vj) in v.iter().enumerate() {
            s += m[(i, off + j)] * vj;
        }
        s *= beta;
        if s != 0.0 {
            for (j, vj) in v.iter().enumerate() {
                m[(i, off + j)] -= s * vj;
            }
        }
    }
}

/// Orthogonal Hessenberg decomposition `A = Q H Q^T`.
#[derive(Debug, Clone)]
pub struct Hessenberg {
    pub h: RMat,
    pub q: RMat,
}

pub fn hessenberg(a: &RMat) -> Hessenberg {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let (v, beta, alpha) = householder(&x);
        if beta == 0.0 {
            continue;
        }
        reflect_rows(&mut h, &v, beta, k + 1);
        reflect_cols(&mut h, &v, beta, k + 1);
        reflect_cols(&mut q, &v, beta, k + 1);
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    Hessenberg { h, q }
}

/// Solves `(s I - H) X = R` for upper Hessenberg `H` in O(n^2) per column.
pub fn solve_shifted_hessenberg(h: &RMat, s: Complex64, rhs: &CMat) -> Result<CMat> {
    let n = h.nrows();
    let m = rhs.ncols();
    let zero = Complex64::new(0.0, 0.0);
    // Row-major working copy of the band-plus-upper part.
    let mut w = vec![zero; n * n];
    for i in 0..n {
        let row = &mut w[i * n..(i + 1) * n];
        for (j, slot) in row.iter_mut().enumerate().skip(i.saturating_sub(1)) {
            *slot = Complex64::new(-h[(i, j)], 0.0);
        }
        row[i] += s;
    }
    // Right-hand sides stored row-major as well.
    let mut x: Vec<Complex64> = (0..n * m).map(|idx| rhs[(idx / m, idx % m)]).collect();
    for k in 0..n.saturating_sub(1) {
        let (top, bottom) = w.split_at_mut((k + 1) * n);
        let rk = &mut top[k * n..];
        let rk1 = &mut bottom[..n];
        if rk1[k].norm_sqr() > rk[k].norm_sqr() {
            rk[k..].swap_with_slice(&mut rk1[k..]);
            let (xa, xb) = x.split_at_mut((k + 1) * m);
            xa[k * m..].swap_with_slice(&mut xb[..m]);
        }
        let piv = rk[k];
        if piv == zero || rk1[k] == zero {
            continue;
        }
        let f = rk1[k] / piv;
        rk1[k] = zero;
        for j in k + 1..n {
            rk1[j] -= f * rk[j];
        }
        for c in 0..m {
            let t = x[k * m + c];
            x[(k + 1) * m + c] -= f * t;
        }
    }
    for c in 0..m {
        for i in (0..n).rev() {
            let row = &w[i * n..(i + 1) * n];
            let mut acc = x[i * m + c];
            for j in i + 1..n {
                acc -= row[j] * x[j * m + c];
            }
            if row[i] == zero {
                return Err(Error::Linalg(format!("s = {s} is an eigenvalue")));
            }
            x[i * m + c] = acc / row[i];
        }
    }
    Ok(CMat::from_fn(n, m, |i, c| x[i * m + c]))
}

fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (0.0, y.conj() / ny);
    }
    let r = nx.hypot(ny);
    (nx / r, (x / nx) * y.conj() / r)
}

/// Complex Schur form `A = U T U^H` of a real matrix.
pub fn complex_schur(a: &RMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let hs = hessenberg(a);
    let mut t = to_complex(&hs.h);
    let mut u = to_complex(&hs.q);
    if n <= 1 {
        return Ok((u, t));
    }
    let eps = f64::EPSILON;
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let mut ihi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let zero = Complex64::new(0.0, 0.0);
    while ihi > 0 {
        let mut l = ihi;
        while l > 0 {
            let sub = t[(l, l - 1)].norm();
            let diag = t[(l, l)].norm() + t[(l - 1, l - 1)].norm();
            let diag = if diag == 0.0 { scale } else { diag };
            if sub <= eps * diag {
                t[(l, l - 1)] = zero;
                break;
            }
            l -= 1;
        }
        if l == ihi {
            ihi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 60 * n + 100 {
            return Err(Error::Linalg("complex QR iteration did not converge".into()));
        }
        let mu = if iter % 11 == 10 {
            t[(ihi, ihi)] + Complex64::new(0.75 * t[(ihi, ihi - 1)].norm(), 0.0)
        } else {
            let p = t[(ihi - 1, ihi - 1)];
            let b = t[(ihi - 1, ihi)];
            let c = t[(ihi, ihi - 1)];
            let d = t[(ihi, ihi)];
            let half = (p - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let e1 = (p + d) * 0.5 + disc;
            let e2 = (p + d) * 0.5 - disc;
            if (e1 - d).norm() < (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        let mut x = t[(l, l)] - mu;
        let mut y = t[(l + 1, l)];
        for k in l..ihi {
            if k > l {
                x = t[(k, k - 1)];
                y = t[(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let j0 = if k > l { k - 1 } else { l };
            for j in j0..n {
                let p = t[(k, j)];
                let q = t[(k + 1, j)];
                t[(k, j)] = p * c + s * q;
                t[(k + 1, j)] = -s.conj() * p + q * c;
            }
            let imax = (k + 2).min(ihi);
            for i in 0..=imax {
                let p = t[(i, k)];
                let q = t[(i, k + 1)];
                t[(i, k)] = p * c + q * s.conj();
                t[(i, k + 1)] = -p * s + q * c;
            }
            for i in 0..n {
                let p = u[(i, k)];
                let q = u[(i, k + 1)];
                u[(i, k)] = p * c + q * s.conj();
                u[(i, k + 1)] = -p * s + q * c;
            }
            if k > l {
                t[(k + 1, k - 1)] = zero;
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = zero;
        }
    }
    Ok((u, t))
}

fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

/// Solves `A X + X A^T + Q = 0` by Bartels-Stewart on the complex Schur form.
pub fn lyapunov(a: &RMat, q: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch("lyapunov: Q must match A".into()));
    }
    let (u, t) = complex_schur(a)?;
    let uh = adjoint(&u);
    let f = &uh * &(&to_complex(q) * &u);
    let mut y = CMat::zeros(n, n);
    let tiny = f64::EPSILON * frobenius(a).max(1.0);
    for j in (0..n).rev() {
        let mut rhs: Vec<Complex64> = (0..n).map(|i| -f[(i, j)]).collect();
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            if tjk.norm() == 0.0 {
                continue;
            }
            for (i, r) in rhs.iter_mut().enumerate() {
                *r -= tjk * y[(i, k)];
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for m in i + 1..n {
                acc -= t[(i, m)] * y[(m, j)];
            }
            let den = t[(i, i)] + shift;
            if den.norm() <= tiny {
                return Err(Error::Linalg(
                    "Lyapunov equation is singular (eigenvalues symmetric about the imaginary axis)"
                        .into(),
                ));
            }
            y[(i, j)] = acc / den;
        }
    }
    let x = &u * &(&y * &uh);
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (x[(i, j)].re + x[(j, i)].re)))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &RMat) -> RMat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = norm1(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a1 = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = identity(n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> RMat {
        Mat::from_fn(n, n, |i, j| {
            c6 * a6[(i, j)] + c4 * a4[(i, j)] + c2 * a2[(i, j)] + c0 * id[(i, j)]
        })
    };
    let inner_u = lin(B[13], B[11], B[9], 0.0);
    let u_poly = &(&a6 * &inner_u) + &lin(B[7], B[5], B[3], B[1]);
    let u = &a1 * &u_poly;
    let inner_v = lin(B[12], B[10], B[8], 0.0);
    let v = &(&a6 * &inner_v) + &lin(B[6], B[4], B[2], B[0]);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = solve(&den, &num);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// One pass of the orthogonal controllability staircase on `(A, B, C)`.
///
/// Returns the transformed triple and the dimension of the controllable
/// subspace, which occupies the leading block.
pub fn controllable_staircase(
    a: &RMat,
    b: &RMat,
    c: &RMat,
    tol: f64,
) -> (RMat, RMat, RMat, usize) {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = a.clone();
    let mut b = b.clone();
    let mut c = c.clone();
    let mut start = 0usize;
    let mut prev: Option<(usize, usize)> = None;
    while start < n {
        // Columns of the current block live in B (first step) or in A.
        let cols: Vec<usize> = match prev {
            None => (0..m).collect(),
            Some((p0, p1)) => (p0..p1).collect(),
        };
        let from_b = prev.is_none();
        let get = |a: &RMat, b: &RMat, i: usize, j: usize| {
            if from_b {
                b[(i, j)]
            } else {
                a[(i, j)]
            }
        };
        let mut used = vec![false; cols.len()];
        let mut rank = 0usize;
        while rank < cols.len() && start + rank < n {
            let row0 = start + rank;
            let mut best = (0.0, usize::MAX);
            for (k, &j) in cols.iter().enumerate() {
                if used[k] {
                    continue;
                }
                let nrm = (row0..n)
                    .map(|i| get(&a, &b, i, j).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if nrm > best.0 {
                    best = (nrm, k);
                }
            }
            if best.0 <= tol {
                break;
            }
            used[best.1] = true;
            let j = cols[best.1];
            let x: Vec<f64> = (row0..n).map(|i| get(&a, &b, i, j)).collect();
            let (v, beta, _) = householder(&x);
            reflect_rows(&mut a, &v, beta, row0);
            reflect_cols(&mut a, &v, beta, row0);
            reflect_rows(&mut b, &v, beta, row0);
            reflect_cols(&mut c, &v, beta, row0);
            rank += 1;
        }
        if rank == 0 {
            break;
        }
        prev = Some((start, start + rank));
        start += rank;
    }
    (a, b, c, start)
}

pub fn submatrix(a: &RMat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> RMat {
    let r0 = rows.start;
    let c0 = cols.start;
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(r0 + i, c0 + j)])
}

pub fn transpose(a: &RMat) -> RMat {
    a.transpose().to_owned()
}

/// Largest singular value of a small complex matrix.
pub fn max_singular_value(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // Power iteration on M^H M, adequate for the handful of channels used here.
    let g = &adjoint(m) * m;
    let k = g.ncols();
    let mut v: Vec<Complex64> = (0..k).map(|i| Complex64::new(1.0 + i as f64 * 0.1, 0.0)).collect();
    let mut lam = 0.0;
    for _ in 0..500 {
        let w: Vec<Complex64> = (0..k)
            .map(|i| (0..k).map(|j| g[(i, j)] * v[j]).sum())
            .collect();
        let nrm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        let next = nrm;
        v = w.into_iter().map(|z| z / nrm).collect();
        if (next - lam).abs() <= 1e-15 * next {
            lam = next;
            break;
        }
        lam = next;
    }
    lam.sqrt()
}
