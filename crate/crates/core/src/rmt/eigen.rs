//! Dense real symmetric eigensolver: Householder tridiagonalization followed
//! by implicit-shift QL, or by Sturm-sequence bisection when only the
//! smallest eigenvalue is needed.

use serde::Serialize;

use crate::error::{Error, Result};

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    /// # Errors
    /// `InvalidArgument` if `rows` is not square or not symmetric to `1e-14`
    /// (relative to the largest entry).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Self { n, data };
        let scale = m.max_abs().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-14 * scale {
                    return Err(Error::InvalidArgument("matrix must be symmetric".into()));
                }
            }
        }
        Ok(m)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| dot(row, x)).collect()
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Row-major `n×n`; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
    n: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.vectors[i * self.n + j]).collect()
    }
}

/// Dot product with eight independent partial sums, in a fixed order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Reusable buffers for [`smallest_eigenvalue_in_place`].
#[derive(Debug, Clone)]
pub struct TridiagWorkspace {
    d: Vec<f64>,
    e: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
}

impl TridiagWorkspace {
    pub fn new(n: usize) -> Self {
        Self { d: vec![0.0; n], e: vec![0.0; n], v: vec![0.0; n], p: vec![0.0; n] }
    }
}

/// Reduce the symmetric matrix stored in the lower triangle of `a`
/// (row-major, `n×n`) to tridiagonal form; `a` is overwritten.
///
/// On return `ws.d` holds the diagonal and `ws.e[k]` the entry `(k+1, k)`.
fn tridiagonalize(a: &mut [f64], n: usize, ws: &mut TridiagWorkspace) {
    ws.d.resize(n, 0.0);
    ws.e.resize(n, 0.0);
    ws.v.resize(n, 0.0);
    ws.p.resize(n, 0.0);
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let base = k + 1;
        let v = &mut ws.v[..m];
        for i in 0..m {
            v[i] = a[(base + i) * n + k];
        }
        let norm2: f64 = dot(v, v);
        ws.d[k] = a[k * n + k];
        let norm = norm2.sqrt();
        if norm == 0.0 {
            ws.e[k] = 0.0;
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        ws.e[k] = alpha;
        v[0] -= alpha;
        let vnorm2 = norm2 - 2.0 * alpha * (v[0] + alpha) + alpha * alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // p = τ A₂₂ v using the lower triangle only.
        let p = &mut ws.p[..m];
        p.fill(0.0);
        for i in 0..m {
            let row = &a[(base + i) * n + base..(base + i) * n + base + i + 1];
            let vi = v[i];
            let (off, diag) = row.split_at(i);
            let s = dot(off, &v[..i]) + diag[0] * vi;
            for (pj, r) in p[..i].iter_mut().zip(off) {
                *pj += r * vi;
            }
            p[i] += s;
        }
        for pj in p.iter_mut() {
            *pj *= tau;
        }
        let kk = 0.5 * tau * dot(p, v);
        for (pj, vj) in p.iter_mut().zip(v.iter()) {
            *pj -= kk * vj;
        }
        // A₂₂ ← A₂₂ − v wᵀ − w vᵀ with w = p.
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(base + i) * n + base..(base + i) * n + base + i + 1];
            for ((r, vj), wj) in row.iter_mut().zip(&v[..=i]).zip(&p[..=i]) {
                *r -= vi * wj + wi * vj;
            }
        }
    }
    if n >= 2 {
        ws.d[n - 2] = a[(n - 2) * n + n - 2];
        ws.e[n - 2] = a[(n - 1) * n + n - 2];
    }
    ws.d[n - 1] = a[(n - 1) * n + n - 1];
    ws.e[n - 1] = 0.0;
}

/// Number of eigenvalues of the tridiagonal `(d, e)` strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_of_tridiagonal(d: &[f64], e: &[f64]) -> f64 {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { e[i - 1].abs() };
        let right = if i + 1 == n { 0.0 } else { e[i].abs() };
        lo = lo.min(d[i] - left - right);
        hi = hi.min(d[i]);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    hi += f64::EPSILON * scale;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
            return 0.5 * (lo + hi);
        }
        if sturm_count(d, e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Smallest eigenvalue of the symmetric matrix in the lower triangle of
/// `a`; `a` is destroyed.
pub fn smallest_eigenvalue_in_place(a: &mut [f64], n: usize, ws: &mut TridiagWorkspace) -> f64 {
    if n == 1 {
        return a[0];
    }
    tridiagonalize(a, n, ws);
    smallest_of_tridiagonal(&ws.d[..n], &ws.e[..n])
}

/// Whether `A − shift·I` is positive definite, for the symmetric matrix in
/// the lower triangle of `a`, by an in-place Cholesky factorization that
/// stops at the first non-positive pivot. `a` is destroyed.
pub fn is_positive_definite_shifted(a: &mut [f64], n: usize, shift: f64) -> bool {
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let pivot = row_i[i] - shift - dot(&row_i[..i], &row_i[..i]);
        if !(pivot > 0.0) {
            return false;
        }
        row_i[i] = pivot.sqrt();
    }
    true
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(m: &SymMatrix) -> f64 {
    let mut a = m.data.clone();
    smallest_eigenvalue_in_place(&mut a, m.n, &mut TridiagWorkspace::new(m.n))
}

/// All eigenvalues in ascending order.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.n;
    if n == 0 {
        return Vec::new();
    }
    let mut a = m.data.clone();
    let mut ws = TridiagWorkspace::new(n);
    tridiagonalize(&mut a, n, &mut ws);
    let mut d = ws.d;
    let mut e = ws.e;
    // ql_implicit expects the subdiagonal shifted by one.
    e.rotate_right(1);
    ql_implicit(&mut d, &mut e, None);
    d
}

/// Full eigendecomposition.
pub fn symmetric_eigen(m: &SymMatrix) -> SymmetricEigen {
    let n = m.n;
    let mut v = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n > 0 {
        tred2(&mut v, &mut d, &mut e, n);
        ql_implicit(&mut d, &mut e, Some(&mut v));
    }
    SymmetricEigen { values: d, vectors: v, n }
}

/// Householder reduction with accumulated transformations: `v` holds the
/// matrix on entry and the orthogonal factor on exit; `e[i]` is the entry
/// `(i, i−1)` of the tridiagonal form.
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in j + 1..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)` with `e[i] = T(i, i−1)`,
/// optionally rotating the columns of `vectors`. Sorts ascending.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut vectors: Option<&mut [f64]>) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..200 {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
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
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = vectors.as_deref_mut() {
                        for k in 0..n {
                            let hk = v[k * n + i + 1];
                            v[k * n + i + 1] = s * v[k * n + i] + c * hk;
                            v[k * n + i] = c * v[k * n + i] - s * hk;
                        }
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
    // Selection sort keeps eigenvector columns paired with their values.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            if let Some(v) = vectors.as_deref_mut() {
                for r in 0..n {
                    v.swap(r * n + i, r * n + k);
                }
            }
        }
    }
}
