//! Random admissible parameter sets, driven by a caller-supplied source of
//! uniform numbers in `[-1, 1]`.

use crate::dirac::DiracSeed;
use crate::error::{Error, Result};
use crate::nonlinear::NWaveSeed;
use crate::matcore::{c64, eigenvalues, solve_sylvester, CMat, Svd};
use crate::snode::SNode;

/// Source of uniform samples in `[-1, 1]`.
pub type Uniform<'a> = &'a mut dyn FnMut() -> f64;

const TRIES: usize = 1000;

pub fn random_cmat(rows: usize, cols: usize, u: Uniform) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c64(u(), u()))
}

pub fn random_hermitian(n: usize, u: Uniform) -> CMat {
    random_cmat(n, n, u).hermitian_part()
}

/// `(H + (i/2) Π W Π^*) S0^{-1}` solves `A S0 - S0 A^* = i Π W Π^*` for any
/// Hermitian `H` and invertible Hermitian `S0`.
fn solve_identity(h: &CMat, pi_w_pi: &CMat, s0_inv: &CMat) -> CMat {
    &(h + &pi_w_pi.scale(c64(0.0, 0.5))) * s0_inv
}

/// Self-adjoint seed with `S(0) = I`.
pub fn random_pe_seed(n: usize, p: usize, u: Uniform) -> Result<DiracSeed> {
    let phi1 = random_cmat(n, p, u);
    let phi2 = random_cmat(n, p, u);
    let h = random_hermitian(n, u);
    let q = &(&phi1 * &phi1.adjoint()) - &(&phi2 * &phi2.adjoint());
    DiracSeed::pe(solve_identity(&h, &q, &CMat::identity(n)), phi1, phi2)
}

/// Skew-self-adjoint seed with `S(0) = I`.
pub fn random_skew_seed(n: usize, p: usize, u: Uniform) -> Result<DiracSeed> {
    let phi1 = random_cmat(n, p, u);
    let phi2 = random_cmat(n, p, u);
    let h = random_hermitian(n, u);
    let q = &(&phi1 * &phi1.adjoint()) + &(&phi2 * &phi2.adjoint());
    DiracSeed::skew(solve_identity(&h, &q, &CMat::identity(n)), phi1, phi2)
}

/// Generalized seed with `σ(A)` in the upper half-plane, drawn by
/// rejection. With `definite` the seed has `S0 = I`; otherwise `S0` has
/// one negative eigenvalue, so `det S(x)` changes sign.
pub fn random_gpe_seed(n: usize, p1: usize, p2: usize, definite: bool, u: Uniform) -> Result<DiracSeed> {
    for _ in 0..TRIES {
        let phi1 = random_cmat(n, p1, u);
        let phi2 = random_cmat(n, p2, u).scale_re(0.5);
        let h = random_hermitian(n, u).scale_re(0.5);
        let mut d = vec![1.0; n];
        if !definite && n > 0 {
            d[0] = -0.5;
        }
        let s0 = CMat::from_real_diag(&d);
        let s0_inv = CMat::from_real_diag(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        let q = &(&phi1 * &phi1.adjoint()) - &(&phi2 * &phi2.adjoint());
        let a = solve_identity(&h, &q, &s0_inv);
        if eigenvalues(&a)?.iter().any(|z| z.im < 0.05) {
            continue;
        }
        if let Ok(seed) = DiracSeed::gpe(a, s0, phi1, phi2) {
            return Ok(seed);
        }
    }
    Err(Error::Numerical("no admissible generalized seed drawn".into()))
}

/// S-node with `A1` lower and `A2` upper triangular and spectra separated,
/// so that every split is admissible.
pub fn random_triangular_node(n: usize, m: usize, u: Uniform) -> Result<SNode> {
    for _ in 0..TRIES {
        let mut a1 = random_cmat(n, n, u);
        let mut a2 = random_cmat(n, n, u);
        for i in 0..n {
            for j in 0..n {
                if j > i {
                    a1[(i, j)] = c64(0.0, 0.0);
                }
                if j < i {
                    a2[(i, j)] = c64(0.0, 0.0);
                }
            }
            let spread = 1.5 * (i as f64 - 0.5 * (n - 1) as f64);
            a1[(i, i)] += c64(spread, 1.5);
            a2[(i, i)] += c64(-spread, -1.5);
        }
        let pi1 = random_cmat(n, m, u);
        let pi2 = random_cmat(n, m, u);
        let s = solve_sylvester(&a1, &a2, &(&pi1 * &pi2.adjoint()))?;
        let node = SNode::new(a1, a2, s, pi1, pi2)?;
        let ok = (1..=n).all(|k| {
            Svd::new(&node.s().block(0, 0, k, k))
                .map(|sv| sv.s[k - 1] > 1e-3 * sv.s[0])
                .unwrap_or(false)
        });
        if ok {
            return Ok(node);
        }
    }
    Err(Error::Numerical("no well-conditioned node drawn".into()))
}

/// N-wave seed with `S(0,0) = I`, signature `b` and the given `D`, `D̂`.
pub fn random_nwave_seed(n: usize, d: Vec<f64>, d_hat: Vec<f64>, b: Vec<f64>, u: Uniform) -> Result<NWaveSeed> {
    let pi0 = random_cmat(n, d.len(), u);
    let h = random_hermitian(n, u);
    let q = &(&pi0 * &CMat::from_real_diag(&b)) * &pi0.adjoint();
    let a = solve_identity(&h, &q, &CMat::identity(n));
    NWaveSeed::new(a, CMat::identity(n), pi0, d, d_hat, b)
}
