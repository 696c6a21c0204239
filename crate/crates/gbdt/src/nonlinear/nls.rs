//! Focusing NLS `2 v_t + i (v_xx + 2 v v^* v) = 0` for scalar `v`:
//! n-soliton solutions on the zero background and n-modulation solutions
//! on the plane wave `v = e^{-it}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{Coefficient, RationalCoeffs};
use crate::matcore::{c64, CMat, GridSpec, C64, I};
use crate::snode::SNode;

use super::{sample_grid, solve_s};

/// Initial solution the transformation starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsBackground {
    /// `v ≡ 0`.
    Zero,
    /// `v = e^{-it}`.
    PlaneWave,
}

impl NlsBackground {
    pub fn v(&self, t: f64) -> C64 {
        match self {
            NlsBackground::Zero => c64(0.0, 0.0),
            NlsBackground::PlaneWave => C64::from_polar(1.0, -t),
        }
    }

    /// `V = [[0, v], [v̄, 0]]`.
    pub fn v_matrix(&self, t: f64) -> CMat {
        let v = self.v(t);
        CMat::from_rows(&[vec![c64(0.0, 0.0), v], vec![v.conj(), c64(0.0, 0.0)]]).expect("2x2")
    }

    /// Fundamental solution `u(x,t,λ)` of `u_x = G u`, `u_t = F u`.
    pub fn u(&self, x: f64, t: f64, lambda: C64) -> CMat {
        match self {
            NlsBackground::Zero => {
                let e = (I * lambda * (x + lambda * t)).exp();
                CMat::from_diag(&[e, e.inv()])
            }
            NlsBackground::PlaneWave => {
                let s = plane_wave_root(lambda);
                let rot = C64::from_polar(1.0, -t / 2.0);
                let phase = (-I * s * (x + lambda * t)).exp();
                let c0 = plane_wave_c0(lambda);
                let left = CMat::from_diag(&[rot, rot.inv()]);
                &(&left * &c0) * &CMat::from_diag(&[phase, phase.inv()])
            }
        }
    }

    /// `(‖u_x - G u‖, ‖u_t - F u‖) / ‖u‖`, with the derivatives of `u`
    /// taken analytically.
    pub fn u_defect(&self, x: f64, t: f64, lambda: C64) -> (f64, f64) {
        let u = self.u(x, t, lambda);
        let (ux, ut) = match self {
            NlsBackground::Zero => {
                let j = j();
                (&j.scale(I * lambda) * &u, &j.scale(I * lambda * lambda) * &u)
            }
            NlsBackground::PlaneWave => {
                let c1 = j().scale(-I * plane_wave_root(lambda));
                let ux = &u * &c1;
                let ut = &(&j() * &u).scale(c64(0.0, -0.5)) + &ux.scale(lambda);
                (ux, ut)
            }
        };
        let (g, f) = aux_matrices(&self.v_matrix(t), lambda);
        let norm = u.norm_fro().max(f64::MIN_POSITIVE);
        (ux.dist(&(&g * &u)) / norm, ut.dist(&(&f * &u)) / norm)
    }
}

fn j() -> CMat {
    CMat::from_real_diag(&[1.0, -1.0])
}

/// `G = iλj + jV` and `F = i(λ² j - iλ jV - jV²/2)` for `V_x = 0`.
fn aux_matrices(v: &CMat, lambda: C64) -> (CMat, CMat) {
    let j = j();
    let jv = &j * v;
    let g = &j.scale(I * lambda) + &jv;
    let inner = &(&j.scale(lambda * lambda) - &jv.scale(I * lambda)) - &(&jv * v).scale_re(0.5);
    (g, inner.scale(I))
}

/// Principal `√(1 + λ²)` with signed zeros cleared, so that points on the
/// branch cut take the root with non-negative imaginary part.
pub fn plane_wave_root(lambda: C64) -> C64 {
    let z = c64(1.0, 0.0) + lambda * lambda;
    c64(z.re + 0.0, z.im + 0.0).sqrt()
}

/// `C0(λ) = [[1, 1], [-i(s + λ), i(s - λ)]]` with `s = √(1 + λ²)`.
pub fn plane_wave_c0(lambda: C64) -> CMat {
    let s = plane_wave_root(lambda);
    CMat::from_rows(&[vec![c64(1.0, 0.0), c64(1.0, 0.0)], vec![-I * (s + lambda), I * (s - lambda)]]).expect("2x2")
}

/// Diagonal `A = diag(a_k)` and vectors `f_k ∈ C²` of an NLS construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsSeed {
    pub a: Vec<C64>,
    pub f: Vec<[C64; 2]>,
    pub background: NlsBackground,
}

impl NlsSeed {
    pub fn new(a: Vec<C64>, f: Vec<[C64; 2]>, background: NlsBackground) -> Result<Self> {
        let seed = Self { a, f, background };
        seed.validate()?;
        Ok(seed)
    }

    /// Seed with `a_k = i r1_k / r2_k`, where `r1_k² - r2_k² = l_k²` for
    /// positive integers, on the plane-wave background.
    pub fn n_modulation(pairs: &[(u64, u64)], f: Vec<[C64; 2]>) -> Result<Self> {
        n_modulation_period(pairs)?;
        let a = pairs.iter().map(|&(r1, r2)| c64(0.0, r1 as f64 / r2 as f64)).collect();
        Self::new(a, f, NlsBackground::PlaneWave)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.f.len() {
            return invalid("one vector f_k is needed per eigenvalue a_k");
        }
        if !self.a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            || !self.f.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return invalid("seed has non-finite entries");
        }
        if self.f.iter().any(|f| f[0].norm() == 0.0 && f[1].norm() == 0.0) {
            return invalid("every f_k must be nonzero");
        }
        let scale = self.a.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for ak in &self.a {
            if self.a.iter().any(|al| (ak - al.conj()).norm() <= 1e-12 * scale) {
                return invalid("a_k must differ from every conj(a_l)");
            }
        }
        Ok(())
    }

    /// Whether `σ(A)` lies in the open upper half-plane with distinct
    /// entries, in which case `S ≻ 0` everywhere.
    pub fn is_positive_class(&self) -> bool {
        self.a.iter().all(|z| z.im > 0.0)
            && self.a.iter().enumerate().all(|(k, ak)| self.a[..k].iter().all(|al| al != ak))
    }

    pub fn a_matrix(&self) -> CMat {
        CMat::from_diag(&self.a)
    }

    /// `Π(x,t)` with rows `ψ_k = (u(x,t,ā_k) f_k)^*`.
    pub fn pi_at(&self, x: f64, t: f64) -> CMat {
        let mut pi = CMat::zeros(self.n(), 2);
        for (k, (ak, fk)) in self.a.iter().zip(&self.f).enumerate() {
            let col = &self.background.u(x, t, ak.conj()) * &CMat::col_vec(fk);
            pi[(k, 0)] = col[(0, 0)].conj();
            pi[(k, 1)] = col[(1, 0)].conj();
        }
        pi
    }

    /// `S` with entries `i ψ_k ψ_j^* / (a_k - ā_j)`, the solution of
    /// `A S - S A^* = i Π Π^*`.
    pub fn s_from_pi(&self, pi: &CMat) -> CMat {
        let g = pi * &pi.adjoint();
        CMat::from_fn(self.n(), self.n(), |k, j| I * g[(k, j)] / (self.a[k] - self.a[j].conj())).hermitian_part()
    }

    pub fn s_at(&self, x: f64, t: f64) -> CMat {
        self.s_from_pi(&self.pi_at(x, t))
    }

    /// `ṽ = v + 2 [Π^* S^{-1} Π]_{12}`.
    pub fn v_tilde_at(&self, x: f64, t: f64) -> Result<C64> {
        let pi = self.pi_at(x, t);
        let s = self.s_from_pi(&pi);
        let core = &pi.adjoint() * &solve_s(x, &s, &pi)?;
        Ok(self.background.v(t) + core[(0, 1)].scale(2.0))
    }

    /// Node `(A, A^*, S, Π, -iΠ)` at `(x,t)`.
    pub fn node_at(&self, x: f64, t: f64) -> Result<SNode> {
        let pi = self.pi_at(x, t);
        let s = self.s_from_pi(&pi);
        let a = self.a_matrix();
        SNode::new_unchecked(a.clone(), a.adjoint(), s, pi.clone(), pi.scale(-I))
    }

    /// Coefficients of `G = iλj + jV` and
    /// `F = i(λ² j - iλ jV - (V_x + jV²)/2)` for the generic engine.
    pub fn coeffs(&self) -> (RationalCoeffs, RationalCoeffs) {
        let bg = self.background;
        let jv = move |t: f64| &j() * &bg.v_matrix(t);
        let g = RationalCoeffs::new(
            2,
            vec![Coefficient::function(move |_, t| -jv(t)), Coefficient::Constant(j().scale(-I))],
            vec![],
        )
        .expect("no poles");
        let f = RationalCoeffs::new(
            2,
            vec![
                Coefficient::function(move |_, t| {
                    let v = bg.v_matrix(t);
                    (&j() * &(&v * &v)).scale(c64(0.0, 0.5))
                }),
                Coefficient::function(move |_, t| -jv(t)),
                Coefficient::Constant(j().scale(-I)),
            ],
            vec![],
        )
        .expect("no poles");
        (g, f)
    }
}

/// `ṽ(x,t)` on a 2-D grid as `1 × 1` samples; points with singular `S`
/// are flagged.
pub fn nls_solution(seed: &NlsSeed, grid: &GridSpec) -> Result<SolutionGrid> {
    seed.validate()?;
    sample_grid("fnls", grid, (1, 1), |x, t| Ok(CMat::scalar(seed.v_tilde_at(x, t)?)))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period in `t` of the n-modulation solution built from `(r1_k, r2_k)`:
/// `2π q`, where `q` is the least common multiple of the denominators of
/// `1/2` and of each `l_k r1_k / r2_k²`.
pub fn n_modulation_period(pairs: &[(u64, u64)]) -> Result<f64> {
    let mut q: u64 = 2;
    for &(r1, r2) in pairs {
        if r2 == 0 || r1 <= r2 {
            return invalid("need r1 > r2 > 0");
        }
        let d = r1 * r1 - r2 * r2;
        let l = (d as f64).sqrt().round() as u64;
        if l * l != d {
            return Err(Error::InvalidInput(format!("{r1}^2 - {r2}^2 is not a perfect square")));
        }
        let (num, den) = (l * r1, r2 * r2);
        let den = den / gcd(num, den);
        q = q / gcd(q, den) * den;
    }
    Ok(2.0 * std::f64::consts::PI * q as f64)
}
