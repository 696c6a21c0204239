//! Schur, Hermitian eigen, singular value and QR decompositions.

use super::{c64, CMat, LinalgError, C64};

const EPS: f64 = f64::EPSILON;

/// Rotation `G = [[c, s], [-conj(s), c]]` with `G [x; y] = [r; 0]`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, c64(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

fn rot_rows(m: &mut CMat, k: usize, c: f64, s: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let a = m[(k, j)];
        let b = m[(k + 1, j)];
        m[(k, j)] = a * c + s * b;
        m[(k + 1, j)] = -s.conj() * a + b * c;
    }
}

/// Right-multiplies columns `k, k+1` by `G^*`.
fn rot_cols(m: &mut CMat, k: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let a = m[(i, k)];
        let b = m[(i, k + 1)];
        m[(i, k)] = a * c + s.conj() * b;
        m[(i, k + 1)] = -s * a + b * c;
    }
}

/// Complex Schur form `A = Q T Q^*` with `T` upper triangular.
#[derive(Clone, Debug)]
pub struct Schur {
    pub q: CMat,
    pub t: CMat,
}

impl Schur {
    pub fn new(a: &CMat) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare(a.shape()));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.nrows();
        let (mut h, mut q) = hessenberg(a);
        if n < 2 {
            return Ok(Self { q, t: h });
        }
        let scale = h.norm_fro().max(f64::MIN_POSITIVE);
        let mut hi = n - 1;
        let mut iter = 0usize;
        let mut total = 0usize;
        while hi > 0 {
            let mut l = hi;
            while l > 0 {
                let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
                let s = if s == 0.0 { scale } else { s };
                if h[(l, l - 1)].norm() <= EPS * s {
                    h[(l, l - 1)] = c64(0.0, 0.0);
                    break;
                }
                l -= 1;
            }
            if l == hi {
                hi -= 1;
                iter = 0;
                continue;
            }
            iter += 1;
            total += 1;
            if total > 60 * n {
                return Err(LinalgError::NoConvergence("Schur QR iteration"));
            }
            let mu = if iter % 11 == 10 {
                h[(hi, hi)] + c64(h[(hi, hi - 1)].norm(), 0.0)
            } else {
                let a = h[(hi - 1, hi - 1)];
                let b = h[(hi - 1, hi)];
                let c = h[(hi, hi - 1)];
                let d = h[(hi, hi)];
                let half = (a - d) * 0.5;
                let disc = (half * half + b * c).sqrt();
                let m1 = (a + d) * 0.5 + disc;
                let m2 = (a + d) * 0.5 - disc;
                if (m1 - d).norm() < (m2 - d).norm() {
                    m1
                } else {
                    m2
                }
            };
            for k in l..hi {
                let (x, y) = if k == l {
                    (h[(l, l)] - mu, h[(l + 1, l)])
                } else {
                    (h[(k, k - 1)], h[(k + 1, k - 1)])
                };
                let (c, s) = givens(x, y);
                let c0 = if k == l { l } else { k - 1 };
                rot_rows(&mut h, k, c, s, c0..n);
                if k > l {
                    h[(k + 1, k - 1)] = c64(0.0, 0.0);
                }
                let r1 = (k + 3).min(hi + 1);
                rot_cols(&mut h, k, c, s, 0..r1);
                rot_cols(&mut q, k, c, s, 0..n);
            }
        }
        for i in 1..n {
            for j in 0..i {
                h[(i, j)] = c64(0.0, 0.0);
            }
        }
        Ok(Self { q, t: h })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diag()
    }

    /// Swaps diagonal entries `k` and `k+1` of the triangular factor.
    fn swap(&mut self, k: usize) {
        let n = self.t.nrows();
        let a = self.t[(k, k)];
        let b = self.t[(k, k + 1)];
        let c = self.t[(k + 1, k + 1)];
        let v1 = b;
        let v2 = c - a;
        let nv = v1.norm().hypot(v2.norm());
        if nv == 0.0 {
            return;
        }
        let (v1, v2) = (v1 / nv, v2 / nv);
        // G = [[v1, -conj(v2)], [v2, conj(v1)]]; T <- G^* T G, Q <- Q G.
        for j in 0..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = v1.conj() * x + v2.conj() * y;
            self.t[(k + 1, j)] = -v2 * x + v1 * y;
        }
        for i in 0..n {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * v1 + y * v2;
            self.t[(i, k + 1)] = -x * v2.conj() + y * v1.conj();
            let x = self.q[(i, k)];
            let y = self.q[(i, k + 1)];
            self.q[(i, k)] = x * v1 + y * v2;
            self.q[(i, k + 1)] = -x * v2.conj() + y * v1.conj();
        }
        self.t[(k + 1, k)] = c64(0.0, 0.0);
        self.t[(k, k)] = c;
        self.t[(k + 1, k + 1)] = a;
    }

    /// Reorders the diagonal so that `key` is non-decreasing along it.
    pub fn sort_by_key(&mut self, key: impl Fn(C64) -> f64) {
        let n = self.t.nrows();
        for pass in 0..n {
            let mut swapped = false;
            for k in 0..n.saturating_sub(1 + pass) {
                if key(self.t[(k, k)]) > key(self.t[(k + 1, k + 1)]) {
                    self.swap(k);
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, `A = Q H Q^*`.
pub fn hessenberg(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMat::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xn == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 { c64(1.0, 0.0) } else { x[0] / x[0].norm() };
        let mut v = x.clone();
        v[0] += phase * xn;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= vn;
        }
        // H <- (I - 2 v v^*) H on rows k+1..n
        for j in 0..n {
            let mut s = c64(0.0, 0.0);
            for (t, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + t, j)];
            }
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= *vi * s * 2.0;
            }
        }
        // H <- H (I - 2 v v^*), Q <- Q (I - 2 v v^*) on columns k+1..n
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = c64(0.0, 0.0);
                for (t, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + t)] * *vi;
                }
                for (t, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + t)] -= s * vi.conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = c64(0.0, 0.0);
        }
    }
    (h, q)
}

/// Eigenvalues of a square matrix, in Schur order.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>, LinalgError> {
    Ok(Schur::new(a)?.eigenvalues())
}

/// Relative Hermitian defect `||A - A^*|| / max(||A||, tiny)`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.norm_fro();
    if n == 0.0 {
        return 0.0;
    }
    a.dist(&a.adjoint()) / n
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns ascending eigenvalues and the unitary matrix of eigenvectors.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.shape()));
    }
    let defect = hermitian_defect(a);
    if defect > 1e-10 {
        return Err(LinalgError::NotHermitian { defect });
    }
    let n = a.nrows();
    let mut m = a.hermitian_part();
    let mut v = CMat::identity(n);
    let total = m.norm_fro();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= EPS * 0.1 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = m[(p, q)];
                let ag = g.norm();
                if ag == 0.0 {
                    continue;
                }
                let u = g / ag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * ag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = [[c, s], [-conj(u) s, conj(u) c]] acting on (p, q).
                let jpq = c64(s, 0.0);
                let jqp = -u.conj() * s;
                let jqq = u.conj() * c;
                for mat in [&mut m, &mut v] {
                    for i in 0..n {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)];
                        mat[(i, p)] = x * c + y * jqp;
                        mat[(i, q)] = x * jpq + y * jqq;
                    }
                }
                for j in 0..n {
                    let x = m[(p, j)];
                    let y = m[(q, j)];
                    m[(p, j)] = x * c + y * jqp.conj();
                    m[(q, j)] = x * jpq + y * jqq.conj();
                }
                m[(p, q)] = c64(0.0, 0.0);
                m[(q, p)] = c64(0.0, 0.0);
                m[(p, p)] = c64(m[(p, p)].re, 0.0);
                m[(q, q)] = c64(m[(q, q)].re, 0.0);
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let vals = idx.iter().map(|&i| m[(i, i)].re).collect();
    let vecs = CMat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    Ok((vals, vecs))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat, LinalgError> {
    let (vals, v) = eigh(a)?;
    let n = vals.len();
    let d = CMat::from_fn(n, n, |i, j| if i == j { c64(f(vals[i]), 0.0) } else { c64(0.0, 0.0) });
    Ok(&(&v * &d) * &v.adjoint())
}

/// Thin singular value decomposition `A = U diag(s) V^*` by one-sided Jacobi.
///
/// Singular values are returned in descending order; `U` is `m x k` and `V`
/// is `n x k` with `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn new(a: &CMat) -> Result<Self, LinalgError> {
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let (m, n) = a.shape();
        if m < n {
            let t = Svd::new(&a.adjoint())?;
            return Ok(Svd { u: t.v, s: t.s, v: t.u });
        }
        let mut w = a.clone();
        let mut v = CMat::identity(n);
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = c64(0.0, 0.0);
                    for i in 0..m {
                        alpha += w[(i, p)].norm_sqr();
                        beta += w[(i, q)].norm_sqr();
                        gamma += w[(i, p)].conj() * w[(i, q)];
                    }
                    let ag = gamma.norm();
                    if ag == 0.0 || ag <= EPS * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let u = gamma / ag;
                    let tau = (beta - alpha) / (2.0 * ag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let jpq = c64(s, 0.0);
                    let jqp = -u.conj() * s;
                    let jqq = u.conj() * c;
                    for (mat, rows) in [(&mut w, m), (&mut v, n)] {
                        for i in 0..rows {
                            let x = mat[(i, p)];
                            let y = mat[(i, q)];
                            mat[(i, p)] = x * c + y * jqp;
                            mat[(i, q)] = x * jpq + y * jqq;
                        }
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let s: Vec<f64> = idx.iter().map(|&j| norms[j]).collect();
        let mut u = CMat::zeros(m, n);
        for (c, &j) in idx.iter().enumerate() {
            if norms[j] > 0.0 {
                for i in 0..m {
                    u[(i, c)] = w[(i, j)] / norms[j];
                }
            }
        }
        complete_orthonormal(&mut u, &s);
        let v = CMat::from_fn(n, n, |r, c| v[(r, idx[c])]);
        Ok(Svd { u, s, v })
    }
}

/// Replaces zero columns of `u` (where `s` vanishes) by orthonormal completions.
fn complete_orthonormal(u: &mut CMat, s: &[f64]) {
    let (m, k) = u.shape();
    for c in 0..k {
        if s[c] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand: Vec<C64> = (0..m).map(|i| if i == e { c64(1.0, 0.0) } else { c64(0.0, 0.0) }).collect();
            for _ in 0..2 {
                for j in 0..k {
                    if j == c || (s[j] == 0.0 && j > c) {
                        continue;
                    }
                    let dot: C64 = (0..m).map(|i| u[(i, j)].conj() * cand[i]).sum();
                    for (i, z) in cand.iter_mut().enumerate() {
                        *z -= u[(i, j)] * dot;
                    }
                }
            }
            let nn = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nn > 0.5 {
                for (i, z) in cand.iter().enumerate() {
                    u[(i, c)] = *z / nn;
                }
                break;
            }
        }
    }
}

/// Householder QR with column pivoting of an `m x n` matrix, `m >= n`.
///
/// Returns the thin orthonormal factor `Q` (`m x n`), the triangular factor
/// and the column permutation.
pub fn qr_pivoted(a: &CMat) -> (CMat, CMat, Vec<usize>) {
    let (m, n) = a.shape();
    assert!(m >= n, "qr_pivoted expects a tall matrix");
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut vs: Vec<Vec<C64>> = Vec::with_capacity(n);
    for k in 0..n {
        let (p, _) = (k..n)
            .map(|j| (j, (k..m).map(|i| r[(i, j)].norm_sqr()).sum::<f64>()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if p != k {
            for i in 0..m {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = t;
            }
            perm.swap(k, p);
        }
        let x: Vec<C64> = (k..m).map(|i| r[(i, k)]).collect();
        let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut v = x.clone();
        if xn > 0.0 {
            let phase = if x[0].norm() == 0.0 { c64(1.0, 0.0) } else { x[0] / x[0].norm() };
            v[0] += phase * xn;
            let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut v {
                *z /= vn;
            }
            for j in k..n {
                let s: C64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * r[(k + t, j)]).sum();
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= *vi * s * 2.0;
                }
            }
        } else {
            v.iter_mut().for_each(|z| *z = c64(0.0, 0.0));
        }
        vs.push(v);
    }
    let mut q = CMat::from_fn(m, n, |i, j| if i == j { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
    for k in (0..n).rev() {
        let v = &vs[k];
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(t, vi)| vi.conj() * q[(k + t, j)]).sum();
            for (t, vi) in v.iter().enumerate() {
                q[(k + t, j)] -= *vi * s * 2.0;
            }
        }
    }
    let rr = CMat::from_fn(n, n, |i, j| if i <= j { r[(i, j)] } else { c64(0.0, 0.0) });
    (q, rr, perm)
}
