use super::decomp::Schur;
use super::{CMat, LinalgError};

/// Relative spectral separation below which `solve_sylvester` refuses.
pub const SEPARATION_TOL: f64 = 1e-10;

/// Smallest distance between the spectra of `a` and `b`.
pub fn spectral_gap(a: &CMat, b: &CMat) -> Result<f64, LinalgError> {
    let ea = Schur::new(a)?.eigenvalues();
    let eb = Schur::new(b)?.eigenvalues();
    Ok(ea
        .iter()
        .flat_map(|x| eb.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min))
}

/// Solves `A X - X B = C` by the complex Bartels-Stewart method.
pub fn solve_sylvester(a: &CMat, b: &CMat, c: &CMat) -> Result<CMat, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.shape()));
    }
    if !b.is_square() {
        return Err(LinalgError::NotSquare(b.shape()));
    }
    if c.shape() != (a.nrows(), b.nrows()) {
        return Err(LinalgError::DimensionMismatch(format!(
            "Sylvester rhs {:?} does not match {}x{}",
            c.shape(),
            a.nrows(),
            b.nrows()
        )));
    }
    let (n, m) = c.shape();
    if n == 0 || m == 0 {
        return Ok(CMat::zeros(n, m));
    }
    let sa = Schur::new(a)?;
    let sb = Schur::new(b)?;
    let scale = (a.norm_fro() + b.norm_fro()).max(1.0);
    let gap = sa
        .t
        .diag()
        .iter()
        .flat_map(|x| sb.t.diag().into_iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap <= SEPARATION_TOL * scale {
        return Err(LinalgError::SpectralOverlap { gap });
    }
    let solve = |rhs: &CMat| -> CMat {
        let f = &(&sa.q.adjoint() * rhs) * &sb.q;
        let t = &sa.t;
        let r = &sb.t;
        let mut y = CMat::zeros(n, m);
        for k in 0..m {
            let mut col: Vec<_> = (0..n).map(|i| f[(i, k)]).collect();
            for j in 0..k {
                let rjk = r[(j, k)];
                if rjk.re != 0.0 || rjk.im != 0.0 {
                    for (i, v) in col.iter_mut().enumerate() {
                        *v += y[(i, j)] * rjk;
                    }
                }
            }
            let rkk = r[(k, k)];
            for i in (0..n).rev() {
                let mut s = col[i];
                for l in i + 1..n {
                    s -= t[(i, l)] * y[(l, k)];
                }
                y[(i, k)] = s / (t[(i, i)] - rkk);
            }
        }
        &(&sa.q * &y) * &sb.q.adjoint()
    };
    let mut x = solve(c);
    let resid = c - &(&(a * &x) - &(&x * b));
    x += &solve(&resid);
    if !x.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::super::c64;
    use super::*;

    #[test]
    fn scalar_examples() {
        let x = solve_sylvester(&CMat::scalar(c64(2.0, 0.0)), &CMat::scalar(c64(1.0, 0.0)), &CMat::scalar(c64(3.0, 0.0)))
            .unwrap();
        assert!((x[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-15);
        let x = solve_sylvester(&CMat::scalar(c64(0.0, 1.0)), &CMat::scalar(c64(0.0, -1.0)), &CMat::scalar(c64(0.0, 2.0)))
            .unwrap();
        assert!((x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn overlap_rejected() {
        let a = CMat::from_diag(&[c64(1.0, 0.0), c64(2.0, 0.0)]);
        let b = CMat::from_diag(&[c64(2.0, 0.0), c64(3.0, 0.0)]);
        assert!(matches!(solve_sylvester(&a, &b, &CMat::identity(2)), Err(LinalgError::SpectralOverlap { .. })));
    }

    #[test]
    fn rectangular_residual() {
        let a = CMat::from_fn(3, 3, |i, j| c64(if i == j { 2.0 + i as f64 } else { 0.3 }, (i as f64 - j as f64) * 0.2));
        let b = CMat::from_fn(2, 2, |i, j| c64(if i == j { -1.0 } else { 0.5 }, 0.1 * (i + j) as f64));
        let c = CMat::from_fn(3, 2, |i, j| c64(i as f64 - j as f64, 1.0));
        let x = solve_sylvester(&a, &b, &c).unwrap();
        let r = &(&(&a * &x) - &(&x * &b)) - &c;
        assert!(r.norm_fro() < 1e-13);
    }
}
