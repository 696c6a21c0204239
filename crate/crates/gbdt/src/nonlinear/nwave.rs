//! N-wave equation `[D, ξ_t] - [D̂, ξ_x] = [[D, ξ], [D̂, ξ]]`: explicit
//! solutions from the trivial solution `ξ ≡ 0`, and the Weyl function of
//! the auxiliary system with its inverse map and time evolution.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dirac::{check_roundtrip, halfplane_samples, HalfPlane};
use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{Coefficient, RationalCoeffs};
use crate::matcore::{
    c64, eigenvalues, expm, expm_gramian, is_posdef, solve_linear, solve_sylvester, spectral_gap, CMat, GridSpec,
    C64, I,
};
use crate::realization::Realization;
use crate::snode::SNode;

use super::{relative, sample_grid, solve_s, SYLVESTER_GAP};

/// Relative tolerance for the seed identity.
pub const NWAVE_SEED_TOL: f64 = 1e-10;
/// Tolerance for the sampled Weyl function properties.
pub const WEYL_TOL: f64 = 1e-8;

/// Parameters `A`, `S(0,0)`, `Π(0,0)` and the diagonal matrices `D`, `D̂`,
/// `B` of an N-wave construction.
#[derive(Clone, Debug, PartialEq)]
pub struct NWaveSeed {
    a: CMat,
    s0: CMat,
    pi0: CMat,
    d: Vec<f64>,
    d_hat: Vec<f64>,
    b: Vec<f64>,
}

impl NWaveSeed {
    pub fn new(a: CMat, s0: CMat, pi0: CMat, d: Vec<f64>, d_hat: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let seed = Self { a, s0, pi0, d, d_hat, b };
        seed.validate()?;
        Ok(seed)
    }

    /// Seed with `B = I`, the setting of the Weyl theory.
    pub fn unsigned(a: CMat, s0: CMat, pi0: CMat, d: Vec<f64>, d_hat: Vec<f64>) -> Result<Self> {
        let m = pi0.ncols();
        Self::new(a, s0, pi0, d, d_hat, vec![1.0; m])
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.pi0.ncols()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn s0(&self) -> &CMat {
        &self.s0
    }

    pub fn pi0(&self) -> &CMat {
        &self.pi0
    }

    pub fn d(&self) -> CMat {
        CMat::from_real_diag(&self.d)
    }

    pub fn d_hat(&self) -> CMat {
        CMat::from_real_diag(&self.d_hat)
    }

    pub fn b(&self) -> CMat {
        CMat::from_real_diag(&self.b)
    }

    fn is_unsigned(&self) -> bool {
        self.b.iter().all(|&b| b == 1.0)
    }

    /// `A S(0,0) - S(0,0) A^* - i Π(0,0) B Π(0,0)^*`.
    pub fn identity_defect(&self) -> CMat {
        let rhs = (&(&self.pi0 * &self.b()) * &self.pi0.adjoint()).scale(I);
        &(&(&self.a * &self.s0) - &(&self.s0 * &self.a.adjoint())) - &rhs
    }

    /// Identity defect relative to the size of its terms.
    pub fn identity_residual(&self) -> f64 {
        let p = self.pi0.norm_fro();
        relative(self.identity_defect().norm_fro(), &[2.0 * self.a.norm_fro() * self.s0.norm_fro(), p * p])
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if !self.a.is_square() || self.s0.shape() != (n, n) || self.pi0.nrows() != n {
            return invalid("A, S0 must be n x n and Pi0 must have n rows");
        }
        if self.d.len() != m || self.d_hat.len() != m || self.b.len() != m {
            return invalid("D, D_hat and B need one entry per column of Pi0");
        }
        if !(self.a.is_finite() && self.s0.is_finite() && self.pi0.is_finite())
            || !self.d.iter().chain(&self.d_hat).all(|v| v.is_finite())
        {
            return invalid("seed has non-finite entries");
        }
        if self.b.iter().any(|&b| b != 1.0 && b != -1.0) {
            return invalid("B must have entries +1 or -1");
        }
        if self.s0.dist(&self.s0.adjoint()) > NWAVE_SEED_TOL * self.s0.norm_fro().max(1.0) {
            return invalid("S0 must be Hermitian");
        }
        let residual = self.identity_residual();
        if residual > NWAVE_SEED_TOL {
            return Err(Error::IdentityViolation { residual, tolerance: NWAVE_SEED_TOL });
        }
        Ok(())
    }

    /// `Π(x,t)`: column `k` is `exp(-i (d_k x + d̂_k t) A) f_k`.
    pub fn pi_at(&self, x: f64, t: f64) -> Result<CMat> {
        let mi = self.a.scale(-I);
        let cols = (0..self.m())
            .map(|k| Ok(&expm(&mi, self.d[k] * x + self.d_hat[k] * t)? * &self.pi0.columns(k, 1)))
            .collect::<Result<Vec<CMat>>>()?;
        Ok(CMat::hstack(&cols.iter().collect::<Vec<_>>()))
    }

    fn sylvester_ok(&self) -> Result<bool> {
        if self.n() == 0 {
            return Ok(false);
        }
        Ok(spectral_gap(&self.a, &self.a.adjoint())? >= SYLVESTER_GAP * self.a.norm_fro().max(1.0))
    }

    /// `S(x,t)`, from the identity when `σ(A)` and `σ(A^*)` are apart and
    /// by integration otherwise.
    pub fn s_at(&self, x: f64, t: f64) -> Result<CMat> {
        if self.sylvester_ok()? {
            self.s_sylvester(x, t)
        } else {
            self.s_integrated(x, t)
        }
    }

    /// `S(x,t)` solved from `A S - S A^* = i Π B Π^*`.
    pub fn s_sylvester(&self, x: f64, t: f64) -> Result<CMat> {
        let pi = self.pi_at(x, t)?;
        let rhs = (&(&pi * &self.b()) * &pi.adjoint()).scale(I);
        Ok(solve_sylvester(&self.a, &self.a.adjoint(), &rhs)?.hermitian_part())
    }

    /// `S(x,t)` from `S_t = Π D̂ B Π^*` along `x = 0` and then
    /// `S_x = Π D B Π^*`, each integrated in closed form.
    pub fn s_integrated(&self, x: f64, t: f64) -> Result<CMat> {
        let mut s = self.s0.clone();
        let line = self.pi_at(0.0, t)?;
        for k in 0..self.m() {
            for (p, rate, h) in [(&self.pi0, self.d_hat[k], t), (&line, self.d[k], x)] {
                let f = p.columns(k, 1);
                let g = expm_gramian(&self.a.scale(c64(0.0, -rate)), &(&f * &f.adjoint()), h)?;
                s += g.scale_re(self.b[k] * rate);
            }
        }
        Ok(s.hermitian_part())
    }

    /// `ξ̃ = -B Π^* S^{-1} Π`, the transform of `ξ ≡ 0`.
    pub fn xi_at(&self, x: f64, t: f64) -> Result<CMat> {
        let pi = self.pi_at(x, t)?;
        let s = self.s_at(x, t)?;
        Ok(-(&self.b() * &(&pi.adjoint() * &solve_s(x, &s, &pi)?)))
    }

    /// `Π^* S^{-1} Π`, the potential in the Weyl-function convention.
    pub fn xi_weyl_at(&self, x: f64, t: f64) -> Result<CMat> {
        let pi = self.pi_at(x, t)?;
        let s = self.s_at(x, t)?;
        Ok(&pi.adjoint() * &solve_s(x, &s, &pi)?)
    }

    /// Node `(A, A^*, S, Π, -i Π B)` at `(x,t)`, whose transfer function is
    /// `I - i B Π^* S^{-1} (A - λ)^{-1} Π`.
    pub fn node_at(&self, x: f64, t: f64) -> Result<SNode> {
        let pi = self.pi_at(x, t)?;
        let pi2 = (&pi * &self.b()).scale(-I);
        SNode::new_unchecked(self.a.clone(), self.a.adjoint(), self.s_at(x, t)?, pi, pi2)
    }

    /// `w_A(x,t,λ)`.
    pub fn transfer_at(&self, x: f64, t: f64, lambda: C64) -> Result<CMat> {
        self.node_at(x, t)?.transfer_eval(lambda)
    }

    /// Coefficients of `G = iλD` and `F = iλD̂` for the generic engine.
    pub fn coeffs(&self) -> (RationalCoeffs, RationalCoeffs) {
        let m = self.m();
        let make = |d: CMat| {
            RationalCoeffs::new(m, vec![Coefficient::Constant(CMat::zeros(m, m)), Coefficient::Constant(d.scale(-I))], vec![])
                .expect("no poles")
        };
        (make(self.d()), make(self.d_hat()))
    }

    /// `‖w^* w - (I - i(λ - λ̄) Π^* (A^* - λ̄)^{-1} S^{-1} (A - λ)^{-1} Π)‖`
    /// for `B = I`.
    pub fn unitarity_defect(&self, x: f64, t: f64, lambda: C64) -> Result<f64> {
        let pi = self.pi_at(x, t)?;
        let s = self.s_at(x, t)?;
        let w = self.transfer_at(x, t, lambda)?;
        let right = solve_linear(&self.a.shift(lambda), &pi)?;
        let core = &right.adjoint() * &solve_linear(&s, &right)?;
        let want = &CMat::identity(self.m()) - &core.scale(I * (lambda - lambda.conj()));
        Ok((&w.adjoint() * &w).dist(&want))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("seed serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("N-wave seed JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct RawSeed {
    #[serde(rename = "A")]
    a: CMat,
    #[serde(rename = "S0")]
    s0: CMat,
    #[serde(rename = "Pi0")]
    pi0: CMat,
    #[serde(rename = "D")]
    d: Vec<f64>,
    #[serde(rename = "D_hat")]
    d_hat: Vec<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
}

impl Serialize for NWaveSeed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawSeed {
            a: self.a.clone(),
            s0: self.s0.clone(),
            pi0: self.pi0.clone(),
            d: self.d.clone(),
            d_hat: self.d_hat.clone(),
            b: Some(self.b.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NWaveSeed {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = RawSeed::deserialize(de)?;
        let b = r.b.unwrap_or_else(|| vec![1.0; r.pi0.ncols()]);
        NWaveSeed::new(r.a, r.s0, r.pi0, r.d, r.d_hat, b).map_err(serde::de::Error::custom)
    }
}

/// `ξ̃ = -B Π^* S^{-1} Π` on a 2-D grid; samples with singular `S` are
/// flagged.
pub fn nwave_solution(seed: &NWaveSeed, grid: &GridSpec) -> Result<SolutionGrid> {
    sample_grid("nwave", grid, (seed.m(), seed.m()), |x, t| seed.xi_at(x, t))
}

/// `Π^* S^{-1} Π` on a 2-D grid, the convention attached to the Weyl
/// function.
pub fn nwave_weyl_potential(seed: &NWaveSeed, grid: &GridSpec) -> Result<SolutionGrid> {
    sample_grid("nwave-weyl", grid, (seed.m(), seed.m()), |x, t| seed.xi_weyl_at(x, t))
}

/// Weyl function `φ(t,λ) = I - i Π(0,t)^* S(0,t)^{-1} (A - λ)^{-1} Π(0,t)`
/// of the auxiliary system at time `t`, as the transfer realization of the
/// node at `(0, t)`.
pub fn nwave_weyl(seed: &NWaveSeed, t: f64) -> Result<Realization> {
    if !seed.is_unsigned() {
        return invalid("the Weyl function is defined for B = I");
    }
    let node = seed.node_at(0.0, t)?;
    if !is_posdef(&node.s().hermitian_part())? {
        return Err(Error::Numerical(format!("S(0, {t}) is not positive definite")));
    }
    node.transfer_realization()
}

/// Weyl functions at each of `ts`.
pub fn nwave_evolve(seed: &NWaveSeed, ts: &[f64]) -> Result<Vec<Realization>> {
    ts.iter().map(|&t| nwave_weyl(seed, t)).collect()
}

/// Largest sampled violations of `φ(λ) φ(λ̄)^* = I`, of `φ^* φ ≤ I` on the
/// lower half-plane, and of `φ(∞) = I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeylDefects {
    pub symmetry: f64,
    pub contraction: f64,
    pub at_infinity: f64,
}

impl WeylDefects {
    pub fn max(&self) -> f64 {
        self.symmetry.max(self.contraction).max(self.at_infinity)
    }
}

pub fn weyl_defects(phi: &Realization) -> Result<WeylDefects> {
    let m = phi.outputs();
    let id = CMat::identity(m);
    let mut out = WeylDefects { symmetry: 0.0, contraction: 0.0, at_infinity: phi.d.dist(&id) };
    for lam in halfplane_samples(HalfPlane::Lower) {
        let (lo, hi) = match (phi.eval(lam), phi.eval(lam.conj())) {
            (Ok(lo), Ok(hi)) => (lo, hi),
            _ => continue,
        };
        out.symmetry = out.symmetry.max((&lo * &hi.adjoint()).dist(&id));
        out.symmetry = out.symmetry.max((&hi * &lo.adjoint()).dist(&id));
        let excess = eigenvalues(&(&lo.adjoint() * &lo))?.iter().map(|z| z.re - 1.0).fold(0.0, f64::max);
        out.contraction = out.contraction.max(excess);
    }
    Ok(out)
}

/// Seed with the given `D`, `D̂` whose Weyl function at `t = 0` is `φ`.
pub fn nwave_inverse(phi: &Realization, d: Vec<f64>, d_hat: Vec<f64>) -> Result<NWaveSeed> {
    let m = phi.outputs();
    if phi.inputs() != m {
        return invalid("Weyl function must be square");
    }
    if d.len() != m || d.windows(2).any(|w| w[0] <= w[1]) || d.last().is_some_and(|&v| v <= 0.0) {
        return invalid("D must be strictly decreasing and positive");
    }
    let defects = weyl_defects(phi)?;
    if defects.max() > WEYL_TOL {
        return Err(Error::NotAdmissible(format!("Weyl function properties violated by {:.3e}", defects.max())));
    }
    let min = phi.minimal()?;
    if min.order() == 0 {
        return NWaveSeed::unsigned(CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, m), d, d_hat);
    }
    if eigenvalues(&min.a)?.iter().any(|z| z.im <= 0.0) {
        return Err(Error::NotAdmissible("state matrix has spectrum outside the open upper half-plane".into()));
    }
    let s0 = solve_sylvester(&min.a, &min.a.adjoint(), &(&min.b * &min.b.adjoint()).scale(I))?.hermitian_part();
    if !is_posdef(&s0)? {
        return Err(Error::NotAdmissible("S0 is not positive definite".into()));
    }
    let seed = NWaveSeed::unsigned(min.a.clone(), s0, min.b.clone(), d, d_hat)?;
    let back = nwave_weyl(&seed, 0.0)?;
    check_roundtrip(phi, &back, &halfplane_samples(HalfPlane::Lower))?;
    Ok(seed)
}
