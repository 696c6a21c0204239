use super::{CMat, LinalgError, C64};

/// Condition-number cap above which `solve_linear` refuses to answer.
pub const COND_CAP: f64 = 1e14;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    parity: bool,
}

impl Lu {
    pub fn new(a: &CMat) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare(a.shape()));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return Err(LinalgError::Singular { cond: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                parity = !parity;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f.re != 0.0 || f.im != 0.0 {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm, parity })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "rhs row mismatch");
        let m = b.ncols();
        let mut x = CMat::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for j in 0..m {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn det(&self) -> C64 {
        let d: C64 = self.lu.diag().into_iter().product();
        if self.parity {
            -d
        } else {
            d
        }
    }

    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.dim()))
    }

    /// 1-norm condition number `||A||_1 ||A^{-1}||_1` of the factored matrix.
    pub fn cond_1(&self, a_norm_1: f64) -> f64 {
        let inv = self.inverse();
        let c = a_norm_1 * inv.norm_1();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

/// Solves `A X = B` with one step of iterative refinement.
///
/// Fails when the 1-norm condition number of `A` exceeds [`COND_CAP`].
pub fn solve_linear(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    solve_linear_capped(a, b, COND_CAP)
}

pub fn solve_linear_capped(a: &CMat, b: &CMat, cap: f64) -> Result<CMat, LinalgError> {
    if a.nrows() != b.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "system matrix {:?} vs right-hand side {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.nrows() == 0 {
        return Ok(CMat::zeros(0, b.ncols()));
    }
    let lu = Lu::new(a)?;
    let cond = lu.cond_1(a.norm_1());
    if cond > cap {
        return Err(LinalgError::Singular { cond });
    }
    let mut x = lu.solve(b);
    let r = b - &(a * &x);
    x += &lu.solve(&r);
    if !x.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(x)
}

/// Matrix inverse subject to the same conditioning cap as [`solve_linear`].
pub fn inverse(a: &CMat) -> Result<CMat, LinalgError> {
    solve_linear(a, &CMat::identity(a.nrows()))
}

pub fn det(a: &CMat) -> Result<C64, LinalgError> {
    if a.nrows() == 0 && a.is_square() {
        return Ok(C64::new(1.0, 0.0));
    }
    match Lu::new(a) {
        Ok(lu) => Ok(lu.det()),
        Err(LinalgError::Singular { .. }) => Ok(C64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::super::c64;
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = CMat::from_rows(&[vec![c64(2.0, 1.0), c64(1.0, 0.0)], vec![c64(0.0, 1.0), c64(3.0, -1.0)]])
            .unwrap();
        let x0 = CMat::col_vec(&[c64(1.0, -2.0), c64(0.5, 0.25)]);
        let b = &a * &x0;
        let x = solve_linear(&a, &b).unwrap();
        assert!(x.dist(&x0) < 1e-14);
    }

    #[test]
    fn singular_is_rejected() {
        let a = CMat::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(solve_linear(&a, &CMat::identity(2)), Err(LinalgError::Singular { .. })));
        let b = CMat::from_real(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-16]]);
        assert!(solve_linear(&b, &CMat::identity(2)).is_err());
    }

    #[test]
    fn determinant() {
        let a = CMat::from_real(&[&[0.0, 2.0], &[3.0, 1.0]]);
        assert!((det(&a).unwrap() - c64(-6.0, 0.0)).norm() < 1e-14);
        assert_eq!(det(&CMat::zeros(0, 0)).unwrap(), c64(1.0, 0.0));
    }
}
