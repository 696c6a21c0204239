//! Matrix exponential by scaling and squaring with diagonal Padé approximants.

use super::lu::Lu;
use super::{CMat, LinalgError};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
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

/// Computes `exp(t M)`.
pub fn expm(m: &CMat, t: f64) -> Result<CMat, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.shape()));
    }
    if !t.is_finite() || !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let a = m.scale_re(t);
    let norm = a.norm_1();
    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(&a, coeffs);
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = a.scale_re(0.5f64.powi(s));
    let mut r = pade13(&a)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(r)
}

/// `∫_0^h e^{sM} Q e^{sM^*} ds` by Van Loan's block exponential.
pub fn expm_gramian(m: &CMat, q: &CMat, h: f64) -> Result<CMat, LinalgError> {
    let n = m.nrows();
    if q.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch(format!("Gramian weight {:?} vs {}x{}", q.shape(), n, n)));
    }
    let mut big = CMat::zeros(2 * n, 2 * n);
    big.set_block(0, 0, &-m);
    big.set_block(0, n, q);
    big.set_block(n, n, &m.adjoint());
    let f = expm(&big, h)?;
    let g = f.block(0, n, n, n);
    let e = f.block(n, n, n, n);
    Ok(&e.adjoint() * &g)
}

fn finish(u: &CMat, v: &CMat) -> Result<CMat, LinalgError> {
    let p = v + u;
    let q = v - u;
    Ok(Lu::new(&q)?.solve(&p))
}

fn pade_low(a: &CMat, b: &[f64]) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = CMat::identity(n).scale_re(b[0]);
    let mut odd = CMat::identity(n).scale_re(b[1]);
    let mut p = CMat::identity(n);
    for k in 1..b.len() / 2 {
        p = &p * &a2;
        even += &p.scale_re(b[2 * k]);
        odd += &p.scale_re(b[2 * k + 1]);
    }
    let u = a * &odd;
    finish(&u, &even)
}

fn pade13(a: &CMat) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    let id = CMat::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_inner = &a6.scale_re(b[13]) + &a4.scale_re(b[11]) + a2.scale_re(b[9]);
    let u = a
        * &(&a6 * &u_inner
            + a6.scale_re(b[7])
            + a4.scale_re(b[5])
            + a2.scale_re(b[3])
            + id.scale_re(b[1]));
    let v_inner = &a6.scale_re(b[12]) + &a4.scale_re(b[10]) + a2.scale_re(b[8]);
    let v = &a6 * &v_inner + a6.scale_re(b[6]) + a4.scale_re(b[4]) + a2.scale_re(b[2]) + id.scale_re(b[0]);
    finish(&u, &v)
}

#[cfg(test)]
mod tests {
    use super::super::{c64, C64};
    use super::*;

    fn taylor(m: &CMat, t: f64) -> CMat {
        let a = m.scale_re(t);
        let mut term = CMat::identity(m.nrows());
        let mut sum = term.clone();
        for k in 1..80 {
            term = (&term * &a).scale_re(1.0 / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn matches_taylor_on_4x4() {
        let m = CMat::from_fn(4, 4, |i, j| c64((i as f64 - j as f64) * 0.3 + 0.1, 0.2 * (i * j) as f64 - 0.4));
        let e = expm(&m, 0.7).unwrap();
        let r = taylor(&m, 0.7);
        assert!(e.dist(&r) < 1e-12 * r.norm_fro().max(1.0), "{}", e.dist(&r));
    }

    #[test]
    fn small_and_large_norms() {
        let m = CMat::from_diag(&[c64(0.0, 1.0), c64(-2.0, 0.5), c64(1e-3, 0.0)]);
        for t in [1e-4, 0.3, 1.0, 7.0] {
            let e = expm(&m, t).unwrap();
            for i in 0..3 {
                let want: C64 = (m[(i, i)] * t).exp();
                assert!((e[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn gramian_matches_quadrature() {
        let m = CMat::from_rows(&[
            vec![c64(0.3, -1.0), c64(0.5, 0.0)],
            vec![c64(0.0, 0.2), c64(-0.4, 0.7)],
        ])
        .unwrap();
        let q = CMat::from_real(&[&[1.0, 0.5], &[0.5, 2.0]]);
        let h = 0.8;
        let k = 2000;
        let f = |s: f64| {
            let e = expm(&m, s).unwrap();
            &(&e * &q) * &e.adjoint()
        };
        let mut simpson = &f(0.0) + &f(h);
        for i in 1..k {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            simpson = &simpson + &f(h * i as f64 / k as f64).scale_re(w);
        }
        let simpson = simpson.scale_re(h / (3.0 * k as f64));
        assert!(expm_gramian(&m, &q, h).unwrap().dist(&simpson) < 1e-11);
    }

    #[test]
    fn nilpotent() {
        let m = CMat::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = expm(&m, 3.0).unwrap();
        assert!(e.dist(&CMat::from_real(&[&[1.0, 3.0], &[0.0, 1.0]])) < 1e-14);
        assert_eq!(expm(&CMat::zeros(0, 0), 1.0).unwrap().shape(), (0, 0));
    }
}
