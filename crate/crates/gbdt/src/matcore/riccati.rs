//! Algebraic Riccati equations arising in the inverse problems.
//!
//! Every supported form is rewritten as `X R X + X F + F^* X + Q = 0` and
//! solved through an invariant subspace of the matrix `[[F, R], [-Q, -F^*]]`,
//! followed by Newton refinement.

use serde::{Deserialize, Serialize};

use super::decomp::{eigenvalues, eigh, Schur};
use super::lu::solve_linear;
use super::sylvester::solve_sylvester;
use super::{krylov_rank, CMat, LinalgError, I};

/// Which Riccati equation to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RiccatiForm {
    /// `X C^* C X - i(A X - X A^*) + B B^* = 0` with `X > 0`.
    SaDirac,
    /// `i(X A - A^* X) = C^* C + X B B^* X` with `X = X^*` invertible and
    /// `A + i B B^* X` spectrally in the closed upper half-plane.
    Gpe,
    /// `X C^* C X + i(A X - X A^*) - B B^* = 0` with `X > 0`.
    Skew,
}

struct Standard {
    f: CMat,
    r: CMat,
    q: CMat,
}

fn standard_form(form: RiccatiForm, a: &CMat, b: &CMat, c: &CMat) -> Standard {
    let bb = b * &b.adjoint();
    let cc = &c.adjoint() * c;
    match form {
        RiccatiForm::SaDirac => Standard { f: a.adjoint().scale(I), r: cc, q: bb },
        RiccatiForm::Gpe => Standard { f: a.scale(I), r: -bb, q: -cc },
        RiccatiForm::Skew => Standard { f: a.adjoint().scale(-I), r: cc, q: -bb },
    }
}

/// Residual of the chosen Riccati equation, in its printed form.
pub fn riccati_residual(form: RiccatiForm, a: &CMat, b: &CMat, c: &CMat, x: &CMat) -> CMat {
    let s = standard_form(form, a, b, c);
    standard_residual(&s, x)
}

fn standard_residual(s: &Standard, x: &CMat) -> CMat {
    &(&(&(x * &s.r) * x) + &(x * &s.f)) + &(&(&s.f.adjoint() * x) + &s.q)
}

fn residual_scale(s: &Standard, x: &CMat) -> f64 {
    let nx = x.norm_fro();
    (s.r.norm_fro() * nx * nx + 2.0 * s.f.norm_fro() * nx + s.q.norm_fro()).max(1.0)
}

fn candidate(s: &Standard, ascending: bool) -> Option<CMat> {
    let n = s.f.nrows();
    let h = CMat::vstack(&[&CMat::hstack(&[&s.f, &s.r]), &CMat::hstack(&[&-&s.q, &-&s.f.adjoint()])]);
    let mut schur = Schur::new(&h).ok()?;
    if ascending {
        schur.sort_by_key(|z| z.re);
    } else {
        schur.sort_by_key(|z| -z.re);
    }
    let basis = schur.q.columns(0, n);
    let u = basis.rows_range(0, n);
    let v = basis.rows_range(n, n);
    let x = solve_linear(&u.adjoint(), &v.adjoint()).ok()?.adjoint();
    Some(x.hermitian_part())
}

fn newton_refine(s: &Standard, mut x: CMat) -> CMat {
    let mut res = standard_residual(s, &x).norm_fro();
    for _ in 0..8 {
        if res == 0.0 {
            break;
        }
        let k = &s.f + &(&s.r * &x);
        let rhs = -standard_residual(s, &x);
        let Ok(delta) = solve_sylvester(&k.adjoint(), &-&k, &rhs) else { break };
        let next = (&x + &delta).hermitian_part();
        let next_res = standard_residual(s, &next).norm_fro();
        if !(next_res < res) {
            break;
        }
        x = next;
        res = next_res;
    }
    x
}

fn admissible(form: RiccatiForm, a: &CMat, b: &CMat, x: &CMat) -> bool {
    let Ok((vals, _)) = eigh(x) else { return false };
    let scale = x.norm_fro();
    if scale == 0.0 {
        return false;
    }
    match form {
        RiccatiForm::SaDirac | RiccatiForm::Skew => vals.iter().all(|&v| v > 1e-10 * scale),
        RiccatiForm::Gpe => {
            if vals.iter().any(|v| v.abs() <= 1e-10 * scale) {
                return false;
            }
            let closed = a + &(&(b * &b.adjoint()) * x).scale(I);
            let tol = 1e-8 * closed.norm_fro().max(1.0);
            eigenvalues(&closed).is_ok_and(|ev| ev.iter().all(|z| z.im >= -tol))
        }
    }
}

/// Solves the inverse-problem Riccati equation of the given form.
///
/// The triple `(A, B, C)` must be a minimal realization; among the
/// invariant-subspace solutions the first one meeting the form's side
/// condition is returned.
pub fn solve_inverse_riccati(form: RiccatiForm, a: &CMat, b: &CMat, c: &CMat) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.shape()));
    }
    if b.nrows() != n || c.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    if krylov_rank(a, b)? < n || krylov_rank(&a.adjoint(), &c.adjoint())? < n {
        return Err(LinalgError::NoAdmissibleSolution("realization is not minimal".into()));
    }
    let s = standard_form(form, a, b, c);
    let mut best_residual = f64::INFINITY;
    for ascending in [true, false] {
        let Some(x0) = candidate(&s, ascending) else { continue };
        let x = newton_refine(&s, x0);
        let rel = standard_residual(&s, &x).norm_fro() / residual_scale(&s, &x);
        best_residual = best_residual.min(rel);
        if rel <= 1e-9 && admissible(form, a, b, &x) {
            return Ok(x);
        }
    }
    Err(LinalgError::NoAdmissibleSolution(format!(
        "no solution meets the side condition (best relative residual {best_residual:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::super::c64;
    use super::*;

    #[test]
    fn scalar_sa_example() {
        let a = CMat::scalar(c64(0.0, -1.0));
        let one = CMat::scalar(c64(1.0, 0.0));
        let x = solve_inverse_riccati(RiccatiForm::SaDirac, &a, &one, &one).unwrap();
        assert!((x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-6, "{x:?}");
        assert!(riccati_residual(RiccatiForm::SaDirac, &a, &one, &one, &x).norm_fro() < 1e-9);
    }

    #[test]
    fn zero_input_rejected() {
        let a = CMat::scalar(c64(0.0, -1.0));
        let zero = CMat::scalar(c64(0.0, 0.0));
        let one = CMat::scalar(c64(1.0, 0.0));
        assert!(matches!(
            solve_inverse_riccati(RiccatiForm::SaDirac, &a, &zero, &one),
            Err(LinalgError::NoAdmissibleSolution(_))
        ));
    }

    #[test]
    fn two_positive_roots() {
        // A = -2i, B = sqrt(3), C = -i: X^2 - 4X + 3 = 0.
        let a = CMat::scalar(c64(0.0, -2.0));
        let b = CMat::scalar(c64(3f64.sqrt(), 0.0));
        let c = CMat::scalar(c64(0.0, -1.0));
        let x = solve_inverse_riccati(RiccatiForm::SaDirac, &a, &b, &c).unwrap();
        let v = x[(0, 0)];
        assert!((v - c64(1.0, 0.0)).norm() < 1e-10 || (v - c64(3.0, 0.0)).norm() < 1e-10);
    }
}
