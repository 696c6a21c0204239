//! Dirac-type systems obtained by GBDT from the trivial system: explicit
//! potentials, fundamental solutions, Weyl functions, scattering data and
//! the three inverse problems.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{Coefficient, RationalCoeffs};
use crate::matcore::{
    c64, det, expm, expm_gramian, hermitian_defect, inv_sqrtm_posdef, is_posdef, signature, solve_inverse_riccati,
    solve_linear, solve_sylvester, spectral_gap, sqrtm_posdef, CMat, GridSpec, LinalgError, RiccatiForm, Schur, Svd,
    C64, I,
};
use crate::realization::Realization;
use crate::snode::SNode;

/// Relative tolerance for the seed identities.
pub const SEED_TOL: f64 = 1e-10;
/// Relative spectral gap between `A` and `A^*` above which `S(x)` is taken
/// from the Sylvester identity instead of integrated.
pub const SYLVESTER_GAP: f64 = 1e-6;
/// Bisection tolerance for zeros of `det S(x)`.
pub const SINGULAR_BISECT_TOL: f64 = 1e-10;
/// Relative smallest singular value of `S(x)` below which it is singular.
pub const SINGULAR_RCOND: f64 = 1e-8;
/// Samples closer than this to a zero of `det S(x)` are flagged.
pub const SINGULAR_EXCLUSION: f64 = 1e-6;
/// Cauchy tolerance for the limit defining `ω`.
pub const OMEGA_TOL: f64 = 1e-8;
/// Largest `x` tried in the doubling sequence for `ω`.
pub const OMEGA_CAP: f64 = 32768.0;
/// Tolerance for matching a recovered function against its input.
pub const ROUNDTRIP_TOL: f64 = 1e-8;

const CHUNK: f64 = 0.25;

/// Which Dirac system a seed generates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiracKind {
    /// Self-adjoint system with a pseudo-exponential potential.
    #[serde(rename = "PE")]
    SelfAdjoint,
    /// Self-adjoint system with a generalized pseudo-exponential
    /// (possibly singular) potential.
    #[serde(rename = "GPE")]
    GeneralizedPe,
    /// Skew-self-adjoint system.
    #[serde(rename = "PE2")]
    SkewSelfAdjoint,
}

/// Parameter matrices `A`, `S(0)`, `Φ1(0)`, `Φ2(0)` of a Dirac system.
pub struct DiracSeed {
    kind: DiracKind,
    a: CMat,
    s0: CMat,
    phi1: CMat,
    phi2: CMat,
    scaled: OnceLock<std::result::Result<Scaled, Error>>,
}

impl Clone for DiracSeed {
    fn clone(&self) -> Self {
        Self::assemble(self.kind, self.a.clone(), self.s0.clone(), self.phi1.clone(), self.phi2.clone())
    }
}

impl PartialEq for DiracSeed {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind && self.a == o.a && self.s0 == o.s0 && self.phi1 == o.phi1 && self.phi2 == o.phi2
    }
}

impl std::fmt::Debug for DiracSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiracSeed")
            .field("kind", &self.kind)
            .field("a", &self.a)
            .field("s0", &self.s0)
            .field("phi1", &self.phi1)
            .field("phi2", &self.phi2)
            .finish()
    }
}

fn scale_of(parts: &[f64]) -> f64 {
    parts.iter().sum::<f64>().max(1.0)
}

impl DiracSeed {
    /// Builds and validates a seed.
    pub fn new(kind: DiracKind, a: CMat, s0: CMat, phi1: CMat, phi2: CMat) -> Result<Self> {
        let seed = Self::assemble(kind, a, s0, phi1, phi2);
        seed.validate()?;
        Ok(seed)
    }

    fn assemble(kind: DiracKind, a: CMat, s0: CMat, phi1: CMat, phi2: CMat) -> Self {
        Self { kind, a, s0, phi1, phi2, scaled: OnceLock::new() }
    }

    fn scaled(&self) -> Result<&Scaled> {
        match self.scaled.get_or_init(|| Scaled::new(self)) {
            Ok(s) => Ok(s),
            Err(e) => Err(e.clone()),
        }
    }

    /// Self-adjoint seed with `S(0) = I`.
    pub fn pe(a: CMat, phi1: CMat, phi2: CMat) -> Result<Self> {
        let n = a.nrows();
        Self::new(DiracKind::SelfAdjoint, a, CMat::identity(n), phi1, phi2)
    }

    pub fn gpe(a: CMat, s0: CMat, phi1: CMat, phi2: CMat) -> Result<Self> {
        Self::new(DiracKind::GeneralizedPe, a, s0, phi1, phi2)
    }

    /// Skew-self-adjoint seed with `S(0) = I`.
    pub fn skew(a: CMat, phi1: CMat, phi2: CMat) -> Result<Self> {
        let n = a.nrows();
        Self::new(DiracKind::SkewSelfAdjoint, a, CMat::identity(n), phi1, phi2)
    }

    /// Seed with an empty state space; its potential vanishes.
    pub fn zero(kind: DiracKind, p1: usize, p2: usize) -> Self {
        Self::assemble(kind, CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, p1), CMat::zeros(0, p2))
    }

    pub fn kind(&self) -> DiracKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p1(&self) -> usize {
        self.phi1.ncols()
    }

    pub fn p2(&self) -> usize {
        self.phi2.ncols()
    }

    pub fn m(&self) -> usize {
        self.p1() + self.p2()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn s0(&self) -> &CMat {
        &self.s0
    }

    pub fn phi1(&self) -> &CMat {
        &self.phi1
    }

    pub fn phi2(&self) -> &CMat {
        &self.phi2
    }

    /// `diag(I_p1, -I_p2)`.
    pub fn j(&self) -> CMat {
        signature(self.p1(), self.p2())
    }

    fn pi0(&self) -> CMat {
        CMat::hstack(&[&self.phi1, &self.phi2])
    }

    /// Weight `W` in `A S - S A^* = i Π W Π^*`.
    fn identity_weight(&self) -> CMat {
        match self.kind {
            DiracKind::SkewSelfAdjoint => CMat::identity(self.m()),
            _ => self.j(),
        }
    }

    /// `A S(0) - S(0) A^* - i Π(0) W Π(0)^*`.
    pub fn identity_defect(&self) -> CMat {
        let pi = self.pi0();
        let rhs = (&(&pi * &self.identity_weight()) * &pi.adjoint()).scale(I);
        &(&(&self.a * &self.s0) - &(&self.s0 * &self.a.adjoint())) - &rhs
    }

    fn identity_scale(&self) -> f64 {
        let pi = self.pi0().norm_fro();
        scale_of(&[2.0 * self.a.norm_fro() * self.s0.norm_fro(), pi * pi])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !self.a.is_square() || self.s0.shape() != (n, n) {
            return invalid("A and S0 must be square of the same order");
        }
        if self.phi1.nrows() != n || self.phi2.nrows() != n {
            return invalid("Phi1 and Phi2 must have n rows");
        }
        if ![&self.a, &self.s0, &self.phi1, &self.phi2].iter().all(|m| m.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        if self.kind != DiracKind::GeneralizedPe {
            if self.p1() != self.p2() {
                return invalid(format!("Phi1 and Phi2 must have equal widths, got {} and {}", self.p1(), self.p2()));
            }
            if self.s0.dist(&CMat::identity(n)) > SEED_TOL {
                return invalid("S0 must be the identity");
            }
        }
        let defect = self.identity_defect().norm_fro();
        let tol = SEED_TOL * self.identity_scale();
        if defect > tol {
            return Err(Error::IdentityViolation { residual: defect, tolerance: tol });
        }
        if self.kind == DiracKind::GeneralizedPe && n > 0 {
            if hermitian_defect(&self.s0) > SEED_TOL {
                return invalid("S0 must be Hermitian");
            }
            let sv = Svd::new(&self.s0)?.s;
            if sv[n - 1] < 1e-12 * sv[0] {
                return invalid("S0 must be invertible");
            }
            for (name, phi) in [("Phi1", &self.phi1), ("Phi2", &self.phi2)] {
                let r = Realization::new(self.a.clone(), phi.clone(), CMat::zeros(0, n), CMat::zeros(0, phi.ncols()))?;
                if !r.is_controllable()? {
                    return Err(Error::NotAdmissible(format!("(A, {name}) is not full range")));
                }
            }
            let floor = -1e-9 * self.a.norm_fro().max(1.0);
            if crate::matcore::eigenvalues(&self.a)?.iter().any(|z| z.im < floor) {
                return Err(Error::NotAdmissible("A has spectrum in the open lower half-plane".into()));
            }
        }
        Ok(())
    }

    /// `Π(x) = [e^{-ixA} Φ1(0), e^{ixA} Φ2(0)]`.
    pub fn pi_at(&self, x: f64) -> Result<CMat> {
        let e = expm(&self.a.scale(-I), x)?;
        let f = expm(&self.a.scale(I), x)?;
        Ok(CMat::hstack(&[&(&e * &self.phi1), &(&f * &self.phi2)]))
    }

    /// `S(x) + ∫_x^{x+h} S'` computed exactly on chunks.
    fn advance(&self, mut s: CMat, x: f64, h: f64) -> Result<CMat> {
        let pieces = (h.abs() / CHUNK).ceil().max(1.0) as usize;
        let dh = h / pieces as f64;
        let sign = if self.kind == DiracKind::SkewSelfAdjoint { -1.0 } else { 1.0 };
        let ma = self.a.scale(-I);
        let pa = self.a.scale(I);
        for k in 0..pieces {
            let xk = x + dh * k as f64;
            let pi = self.pi_at(xk)?;
            let (p1, p2) = (pi.columns(0, self.p1()), pi.columns(self.p1(), self.p2()));
            s += expm_gramian(&ma, &(&p1 * &p1.adjoint()), dh)?;
            s += expm_gramian(&pa, &(&p2 * &p2.adjoint()), dh)?.scale_re(sign);
        }
        Ok(s)
    }

    /// `S(x) = S(0) + ∫_0^x Π W Π^*` with `W = I` or `j`.
    pub fn s_at(&self, x: f64) -> Result<CMat> {
        if self.sylvester_ok()? {
            return self.s_sylvester(x);
        }
        self.advance(self.s0.clone(), 0.0, x)
    }

    /// `S(x)` from the integrated identity only.
    pub fn s_integrated(&self, x: f64) -> Result<CMat> {
        self.advance(self.s0.clone(), 0.0, x)
    }

    /// `S(x)` from `A S - S A^* = i Π W Π^*`; requires separated spectra.
    pub fn s_sylvester(&self, x: f64) -> Result<CMat> {
        let pi = self.pi_at(x)?;
        let rhs = (&(&pi * &self.identity_weight()) * &pi.adjoint()).scale(I);
        Ok(solve_sylvester(&self.a, &self.a.adjoint(), &rhs)?)
    }

    fn sylvester_ok(&self) -> Result<bool> {
        if self.n() == 0 {
            return Ok(false);
        }
        Ok(spectral_gap(&self.a, &self.a.adjoint())? >= SYLVESTER_GAP * self.a.norm_fro().max(1.0))
    }

    /// `S` at every grid abscissa.
    pub fn s_on(&self, xs: &[f64]) -> Result<Vec<CMat>> {
        if self.sylvester_ok()? {
            return xs.par_iter().map(|&x| self.s_sylvester(x)).collect();
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut s = self.s0.clone();
        let mut last = 0.0;
        for &x in xs {
            s = self.advance(s, last, x - last)?;
            last = x;
            out.push(s.clone());
        }
        Ok(out)
    }

    /// `ṽ(x)`.
    pub fn potential_at(&self, x: f64) -> Result<CMat> {
        let sc = self.scaled()?;
        let s = sc.s_at(x)?;
        check_invertible(x, &s)?;
        sc.potential(x, &s).map_err(|e| singular_at(x, e))
    }

    /// `ṽ` on `grid`. Self-adjoint and skew seeds fail on a singular `S`;
    /// generalized seeds flag samples near zeros of `det S` instead.
    pub fn potential(&self, grid: &GridSpec) -> Result<SolutionGrid> {
        let sc = self.scaled()?;
        let xs = grid.xs();
        let ss = sc.s_on(&xs)?;
        let zeros = if self.kind == DiracKind::GeneralizedPe { sc.zeros(&xs, &ss)? } else { Vec::new() };
        let near = |x: f64| zeros.iter().any(|z| (z - x).abs() < SINGULAR_EXCLUSION);
        let values: Vec<Option<CMat>> = xs
            .par_iter()
            .zip(ss.par_iter())
            .map(|(&x, s)| {
                if near(x) {
                    return Ok(None);
                }
                match sc.potential(x, s) {
                    Ok(v) => Ok(Some(v)),
                    Err(_) if self.kind == DiracKind::GeneralizedPe => Ok(None),
                    Err(e) => Err(singular_at(x, e)),
                }
            })
            .collect::<Result<_>>()?;
        let (p1, p2) = (self.p1(), self.p2());
        let flags: Vec<bool> = values.iter().map(Option::is_none).collect();
        let samples = values.into_iter().map(|v| v.unwrap_or_else(|| CMat::zeros(p1, p2))).collect();
        let mut out = SolutionGrid::new(self.system_name(), *grid, samples)?;
        for (i, f) in flags.into_iter().enumerate() {
            if f {
                out.flag(i);
            }
        }
        Ok(out)
    }

    fn system_name(&self) -> &'static str {
        match self.kind {
            DiracKind::SelfAdjoint => "dirac-pe",
            DiracKind::GeneralizedPe => "dirac-gpe",
            DiracKind::SkewSelfAdjoint => "dirac-pe2",
        }
    }

    /// Zeros of `det S(x)` in the closed grid interval, located by sign
    /// changes between samples and bisection.
    pub fn singular_points(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let sc = self.scaled()?;
        let xs = grid.xs();
        let ss = sc.s_on(&xs)?;
        sc.zeros(&xs, &ss)
    }

    /// Whether `S(x) ≻ 0` at every grid point.
    pub fn s_positive_on(&self, grid: &GridSpec) -> Result<bool> {
        for s in self.scaled()?.s_on(&grid.xs())? {
            if !is_posdef(&s.hermitian_part())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// S-node at `x`: `(A, A^*, S(x), Π(x), Π2(x))` with `Π2^* = i j Π^*`
    /// (self-adjoint) or `Π2^* = i Π^*` (skew).
    pub fn node_at(&self, x: f64) -> Result<SNode> {
        let pi = self.pi_at(x)?;
        let pi2 = match self.kind {
            DiracKind::SkewSelfAdjoint => pi.scale(-I),
            _ => (&pi * &self.j()).scale(-I),
        };
        SNode::new_unchecked(self.a.clone(), self.a.adjoint(), self.s_at(x)?, pi, pi2)
    }

    /// Coefficients `q1 = -i j`, `q0 = 0` of the trivial initial system in
    /// the form used by [`crate::gbdt_core`].
    pub fn gbdt_coeffs(&self) -> RationalCoeffs {
        let m = self.m();
        let q1 = self.j().scale(-I);
        RationalCoeffs::new(m, vec![Coefficient::Constant(CMat::zeros(m, m)), Coefficient::Constant(q1)], vec![])
            .expect("no poles")
    }

    /// `w_A(x, λ)`.
    pub fn transfer_at(&self, x: f64, lambda: C64) -> Result<CMat> {
        let sc = self.scaled()?;
        let s = sc.s_at(x)?;
        check_invertible(x, &s)?;
        sc.node(x, s)?.transfer_eval(lambda).map_err(|e| singular_at(x, e))
    }

    /// `e^{ixλj}`.
    pub fn free_solution(&self, x: f64, lambda: C64) -> CMat {
        let z = C64::new(0.0, x) * lambda;
        let d: Vec<C64> = (0..self.p1()).map(|_| z.exp()).chain((0..self.p2()).map(|_| (-z).exp())).collect();
        CMat::from_diag(&d)
    }

    /// Fundamental solution `w_A(x,λ) e^{ixλj} w_A(0,λ)^{-1}`, normalized at
    /// `x = 0`; generalized seeds omit the normalization.
    pub fn fundamental_solution(&self, x: f64, lambda: C64) -> Result<CMat> {
        let u = &self.transfer_at(x, lambda)? * &self.free_solution(x, lambda);
        if self.kind == DiracKind::GeneralizedPe {
            return Ok(u);
        }
        let w0 = self.transfer_at(0.0, lambda)?;
        Ok(solve_linear(&w0.transpose(), &u.transpose())?.transpose())
    }

    /// Block potential `Ṽ = [[0, ṽ], [ṽ^*, 0]]`.
    pub fn block_potential(&self, v: &CMat) -> CMat {
        let (p1, p2) = v.shape();
        let mut out = CMat::zeros(p1 + p2, p1 + p2);
        out.set_block(0, p1, v);
        out.set_block(p1, 0, &v.adjoint());
        out
    }

    /// Coefficient of the system `u' = H(x, λ) u` at a potential value.
    pub fn system_matrix(&self, v: &CMat, lambda: C64) -> CMat {
        let j = self.j();
        let jv = &j * &self.block_potential(v);
        match self.kind {
            DiracKind::SkewSelfAdjoint => &j.scale(I * lambda) + &jv,
            _ => (&j.scale(lambda) + &jv).scale(I),
        }
    }

    /// `w^* w - [I - i(λ - λ̄) Π^* (A^* - λ̄)^{-1} S^{-1} (A - λ)^{-1} Π]`
    /// for skew seeds.
    pub fn unitarity_defect(&self, x: f64, lambda: C64) -> Result<f64> {
        if self.kind != DiracKind::SkewSelfAdjoint {
            return invalid("the unitarity identity applies to skew-self-adjoint seeds");
        }
        let w = self.transfer_at(x, lambda)?;
        let pi = self.pi_at(x)?;
        let s = self.s_at(x)?;
        let r = solve_linear(&self.a.shift(lambda), &pi)?;
        let inner = solve_linear(&s, &r)?;
        let left = solve_linear(&self.a.adjoint().shift(lambda.conj()), &inner)?;
        let term = (&pi.adjoint() * &left).scale(I * (lambda - lambda.conj()));
        let want = &CMat::identity(self.m()) - &term;
        Ok((&(&w.adjoint() * &w) - &want).max_abs())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrices serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("Dirac seed JSON: {e}")))
    }
}

/// Index splitting eigenvalues sorted by imaginary part into a lower and an
/// upper group: least growth of the damped exponentials, subject to a
/// separation of `1e-3 scale` between the groups.
fn split_index(ims: &[f64], scale: f64) -> usize {
    let n = ims.len();
    let mut best = (f64::INFINITY, 0.0, 0);
    for k in 0..=n {
        let gap = if k == 0 || k == n { f64::INFINITY } else { ims[k] - ims[k - 1] };
        if gap < 1e-3 * scale {
            continue;
        }
        let lo = ims[..k].iter().cloned().fold(0.0, f64::max);
        let hi = -ims[k..].iter().cloned().fold(0.0, f64::min);
        let growth = lo.max(hi);
        if growth < best.0 || (growth == best.0 && gap > best.1) {
            best = (growth, gap, k);
        }
    }
    best.2
}

/// The seed in a basis where `A = diag(A_lo, A_hi)` splits the spectrum
/// across the real axis, carried as `Π̃ = D Π` and `S̃ = D S D^*` with
/// `D(x) = diag(e^{-ixA_lo}, e^{ixA_hi})`. Both stay bounded while `Π` and
/// `S` grow; `ṽ`, `w_A` and the inertia of `S` are unchanged.
#[derive(Clone, Debug)]
struct Scaled {
    kind: DiracKind,
    a: CMat,
    k: usize,
    s0: CMat,
    phi1: CMat,
    phi2: CMat,
    weight: CMat,
    j: CMat,
    sylvester: bool,
}

impl Scaled {
    fn new(seed: &DiracSeed) -> Result<Self> {
        let n = seed.n();
        let (t, t_inv, k) = if n == 0 {
            (CMat::zeros(0, 0), CMat::zeros(0, 0), 0)
        } else {
            let mut schur = Schur::new(&seed.a)?;
            schur.sort_by_key(|z| z.im);
            let ims: Vec<f64> = schur.eigenvalues().iter().map(|z| z.im).collect();
            let k = split_index(&ims, seed.a.norm_fro().max(1.0));
            let mut y = CMat::identity(n);
            let mut y_inv = CMat::identity(n);
            if k > 0 && k < n {
                let tt = &schur.t;
                let x = solve_sylvester(&tt.block(0, 0, k, k), &tt.block(k, k, n - k, n - k), &-tt.block(0, k, k, n - k))?;
                y.set_block(0, k, &x);
                y_inv.set_block(0, k, &-x);
            }
            (&y_inv * &schur.q.adjoint(), &schur.q * &y, k)
        };
        let mut a = &(&t * &seed.a) * &t_inv;
        if k > 0 && k < n {
            a.set_block(0, k, &CMat::zeros(k, n - k));
            a.set_block(k, 0, &CMat::zeros(n - k, k));
        }
        Ok(Self {
            kind: seed.kind,
            a,
            k,
            s0: (&(&t * &seed.s0) * &t.adjoint()).hermitian_part(),
            phi1: &t * &seed.phi1,
            phi2: &t * &seed.phi2,
            weight: seed.identity_weight(),
            j: seed.j(),
            sylvester: seed.sylvester_ok()?,
        })
    }

    fn n(&self) -> usize {
        self.a.nrows()
    }

    fn blocks(&self) -> (CMat, CMat) {
        let (n, k) = (self.n(), self.k);
        (self.a.block(0, 0, k, k), self.a.block(k, k, n - k, n - k))
    }

    /// `D(x)`.
    fn d(&self, x: f64) -> Result<CMat> {
        let (lo, hi) = self.blocks();
        Ok(CMat::block_diag(&[&expm(&lo.scale(-I), x)?, &expm(&hi.scale(I), x)?]))
    }

    /// `Π̃(x) = [diag(e^{-2ixA_lo}, I) Φ1, diag(I, e^{2ixA_hi}) Φ2]`.
    fn pi(&self, x: f64) -> Result<CMat> {
        let (n, k) = (self.n(), self.k);
        let (lo, hi) = self.blocks();
        let p1 = CMat::vstack(&[&(&expm(&lo.scale(-I), 2.0 * x)? * &self.phi1.rows_range(0, k)), &self.phi1.rows_range(k, n - k)]);
        let p2 = CMat::vstack(&[&self.phi2.rows_range(0, k), &(&expm(&hi.scale(I), 2.0 * x)? * &self.phi2.rows_range(k, n - k))]);
        Ok(CMat::hstack(&[&p1, &p2]))
    }

    fn s_sylvester(&self, x: f64) -> Result<CMat> {
        let pi = self.pi(x)?;
        let rhs = (&(&pi * &self.weight) * &pi.adjoint()).scale(I);
        Ok(solve_sylvester(&self.a, &self.a.adjoint(), &rhs)?)
    }

    /// `S̃(x + h)` from `S̃(x)`, exact on chunks of length at most `CHUNK`.
    fn advance(&self, mut s: CMat, x: f64, h: f64) -> Result<CMat> {
        let pieces = (h.abs() / CHUNK).ceil().max(1.0) as usize;
        let dh = h / pieces as f64;
        let sign = if self.kind == DiracKind::SkewSelfAdjoint { -1.0 } else { 1.0 };
        let (ma, pa) = (self.a.scale(-I), self.a.scale(I));
        let p1w = self.phi1.ncols();
        let d = self.d(dh)?;
        for k in 0..pieces {
            let pi = self.pi(x + dh * k as f64)?;
            let (p1, p2) = (pi.columns(0, p1w), pi.columns(p1w, pi.ncols() - p1w));
            s += expm_gramian(&ma, &(&p1 * &p1.adjoint()), dh)?;
            s += expm_gramian(&pa, &(&p2 * &p2.adjoint()), dh)?.scale_re(sign);
            s = &(&d * &s) * &d.adjoint();
        }
        Ok(s.hermitian_part())
    }

    fn s_at(&self, x: f64) -> Result<CMat> {
        if self.sylvester {
            return self.s_sylvester(x);
        }
        self.advance(self.s0.clone(), 0.0, x)
    }

    fn s_on(&self, xs: &[f64]) -> Result<Vec<CMat>> {
        if self.sylvester {
            return xs.par_iter().map(|&x| self.s_sylvester(x)).collect();
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut s = self.s0.clone();
        let mut last = 0.0;
        for &x in xs {
            s = self.advance(s, last, x - last)?;
            last = x;
            out.push(s.clone());
        }
        Ok(out)
    }

    fn potential(&self, x: f64, s: &CMat) -> Result<CMat> {
        let pi = self.pi(x)?;
        let p1w = self.phi1.ncols();
        let p1 = pi.columns(0, p1w);
        let p2 = pi.columns(p1w, pi.ncols() - p1w);
        let factor = match self.kind {
            DiracKind::SkewSelfAdjoint => c64(2.0, 0.0),
            _ => c64(0.0, -2.0),
        };
        Ok((&p1.adjoint() * &solve_linear(s, &p2)?).scale(factor))
    }

    fn node(&self, x: f64, s: CMat) -> Result<SNode> {
        let pi = self.pi(x)?;
        let pi2 = match self.kind {
            DiracKind::SkewSelfAdjoint => pi.scale(-I),
            _ => (&pi * &self.j).scale(-I),
        };
        SNode::new_unchecked(self.a.clone(), self.a.adjoint(), s, pi, pi2)
    }

    fn zeros(&self, xs: &[f64], ss: &[CMat]) -> Result<Vec<f64>> {
        let dets: Vec<f64> = ss.iter().map(|s| det(s).map(|d| d.re)).collect::<Result<_, _>>()?;
        let mut zeros = Vec::new();
        for k in 0..xs.len() {
            if dets[k] == 0.0 {
                zeros.push(xs[k]);
                continue;
            }
            if k + 1 < xs.len() && dets[k] * dets[k + 1] < 0.0 {
                let (mut lo, mut hi) = (xs[k], xs[k + 1]);
                let mut dlo = dets[k];
                while hi - lo > SINGULAR_BISECT_TOL {
                    let mid = 0.5 * (lo + hi);
                    let dm = det(&self.advance(ss[k].clone(), xs[k], mid - xs[k])?)?.re;
                    if dm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if dm * dlo < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        dlo = dm;
                    }
                }
                zeros.push(0.5 * (lo + hi));
            }
        }
        Ok(zeros)
    }
}

/// Whether `S(x) ≻ 0` at every grid point.
pub fn s_positive_on(seed: &DiracSeed, grid: &GridSpec) -> Result<bool> {
    seed.s_positive_on(grid)
}

pub(crate) fn check_invertible(x: f64, s: &CMat) -> Result<()> {
    if s.nrows() == 0 {
        return Ok(());
    }
    let sv = Svd::new(s)?;
    if sv.s[s.nrows() - 1] <= SINGULAR_RCOND * sv.s[0] {
        return Err(Error::Numerical(format!("S(x) is singular at x = {x}")));
    }
    Ok(())
}

fn singular_at(x: f64, e: Error) -> Error {
    match e {
        Error::Linalg(LinalgError::Singular { .. }) => Error::Numerical(format!("S(x) is singular at x = {x}")),
        other => other,
    }
}

#[derive(Serialize, Deserialize)]
struct RawSeed {
    kind: DiracKind,
    #[serde(rename = "A")]
    a: CMat,
    #[serde(rename = "S0", default, skip_serializing_if = "Option::is_none")]
    s0: Option<CMat>,
    #[serde(rename = "Phi1")]
    phi1: CMat,
    #[serde(rename = "Phi2")]
    phi2: CMat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p2: Option<usize>,
}

impl Serialize for DiracSeed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let empty = self.n() == 0;
        RawSeed {
            kind: self.kind,
            a: self.a.clone(),
            s0: Some(self.s0.clone()),
            phi1: self.phi1.clone(),
            phi2: self.phi2.clone(),
            p1: empty.then_some(self.p1()),
            p2: empty.then_some(self.p2()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiracSeed {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = RawSeed::deserialize(de)?;
        let n = r.a.nrows();
        if n == 0 {
            let p1 = r.p1.unwrap_or(0);
            return Ok(DiracSeed::zero(r.kind, p1, r.p2.unwrap_or(p1)));
        }
        let s0 = r.s0.unwrap_or_else(|| CMat::identity(n));
        DiracSeed::new(r.kind, r.a, s0, r.phi1, r.phi2).map_err(serde::de::Error::custom)
    }
}

/// Half-plane on which a Weyl function is defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfPlane {
    Upper,
    Lower,
}

/// Rational Weyl function with its half-plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylFunction {
    pub realization: Realization,
    pub halfplane: HalfPlane,
}

/// Sample points `|λ| ∈ [1, 10^3]`, 30 per ray, on three rays inside the
/// given half-plane.
pub fn halfplane_samples(h: HalfPlane) -> Vec<C64> {
    let sign = if h == HalfPlane::Upper { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(90);
    for arg in [std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_2, 5.0 * std::f64::consts::FRAC_PI_6] {
        for k in 0..30 {
            let r = 10f64.powf(3.0 * k as f64 / 29.0);
            out.push(C64::from_polar(r, sign * arg));
        }
    }
    out
}

/// `n` points covering the real axis, denser near `0`, scaled by `scale`.
pub fn real_samples(n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let u = std::f64::consts::PI * ((k as f64 + 0.5) / n as f64 - 0.5);
            c64(scale * u.tan(), 0.0)
        })
        .collect()
}

impl WeylFunction {
    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        self.realization.eval(lambda)
    }

    /// Largest violation of `Im φ(λ) ⪰ 0` over the upper half-plane samples,
    /// relative to `max(1, ‖φ(λ)‖)`. Poles on the sample set count as
    /// infinite violations.
    pub fn herglotz_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for lam in halfplane_samples(HalfPlane::Upper) {
            let phi = match self.eval(lam) {
                Ok(p) => p,
                Err(_) => return f64::INFINITY,
            };
            let im = (&phi - &phi.adjoint()).scale(c64(0.0, -0.5));
            let low = match crate::matcore::min_eigenvalue(&im.hermitian_part()) {
                Ok(v) => v,
                Err(_) => return f64::INFINITY,
            };
            worst = worst.max(-low / phi.norm_fro().max(1.0));
        }
        worst
    }

    pub fn is_herglotz(&self) -> bool {
        self.herglotz_violation() <= 1e-10
    }
}

fn require_kind(seed: &DiracSeed, kind: DiracKind) -> Result<()> {
    if seed.kind != kind {
        return invalid(format!("expected a {kind:?} seed, got {:?}", seed.kind));
    }
    Ok(())
}

/// `φ(λ) = i I + 2 Φ2(0)^* (λ - Ă)^{-1} Φ1(0)` with
/// `Ă = A - i Φ1(0) (Φ1(0) + Φ2(0))^*`.
pub fn weyl_direct(seed: &DiracSeed) -> Result<WeylFunction> {
    require_kind(seed, DiracKind::SelfAdjoint)?;
    let p = seed.p1();
    let sum = &seed.phi1 + &seed.phi2;
    let a_breve = &seed.a - &(&seed.phi1 * &sum.adjoint()).scale(I);
    let r = Realization::new(
        a_breve,
        seed.phi1.clone(),
        seed.phi2.adjoint().scale_re(2.0),
        CMat::identity(p).scale(I),
    )?;
    Ok(WeylFunction { realization: r, halfplane: HalfPlane::Upper })
}

/// `φ(λ) = i Φ1(0)^* (λ - Ă)^{-1} Φ2(0)` with `Ă = A - i Φ2(0) Φ2(0)^*`.
pub fn skew_weyl_direct(seed: &DiracSeed) -> Result<WeylFunction> {
    require_kind(seed, DiracKind::SkewSelfAdjoint)?;
    let p = seed.p1();
    let a_breve = &seed.a - &(&seed.phi2 * &seed.phi2.adjoint()).scale(I);
    let r = Realization::new(a_breve, seed.phi2.clone(), seed.phi1.adjoint().scale(I), CMat::zeros(p, p))?;
    Ok(WeylFunction { realization: r, halfplane: HalfPlane::Lower })
}

/// Sup of `‖ṽ‖` (spectral norm) on the grid, used as the half-plane bound
/// `M1` for skew Weyl functions.
pub fn potential_sup(seed: &DiracSeed, grid: &GridSpec) -> Result<f64> {
    let v = seed.potential(grid)?;
    let mut sup: f64 = 0.0;
    for m in v.values() {
        sup = sup.max(Svd::new(m)?.s.first().copied().unwrap_or(0.0));
    }
    Ok(sup)
}

/// `R_L = -(I + iφ)(I - iφ)^{-1} = I - 2 (I - iφ)^{-1}`, minimal.
pub fn reflection_from_weyl(phi: &WeylFunction) -> Result<Realization> {
    let r = &phi.realization;
    let p = r.outputs();
    if r.inputs() != p {
        return invalid("Weyl function must be square");
    }
    let dm = &CMat::identity(p) - &r.d.scale(I);
    let dm_inv = crate::matcore::inverse(&dm)
        .map_err(|_| Error::NotAdmissible("I - i φ(∞) is singular".into()))?;
    let a = &r.a + &(&(&r.b * &dm_inv) * &r.c).scale(I);
    let b = &r.b * &dm_inv;
    let c = (&dm_inv * &r.c).scale(c64(0.0, -2.0));
    let d = &CMat::identity(p) - &dm_inv.scale_re(2.0);
    Realization::new(a, b, c, d)?.minimal()
}

fn to_admissible(e: LinalgError) -> Error {
    match e {
        LinalgError::NoAdmissibleSolution(m) => Error::NotAdmissible(format!("Riccati equation: {m}")),
        other => other.into(),
    }
}

pub(crate) fn check_roundtrip(want: &Realization, got: &Realization, points: &[C64]) -> Result<()> {
    for &lam in points {
        let (a, b) = match (want.eval(lam), got.eval(lam)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let err = a.dist(&b) / a.norm_fro().max(1.0);
        if err > ROUNDTRIP_TOL {
            return Err(Error::Numerical(format!("recovered function differs by {err:.3e} at {lam}")));
        }
    }
    Ok(())
}

/// Self-adjoint seed whose Weyl function is `φ`.
pub fn weyl_inverse(phi: &Realization) -> Result<DiracSeed> {
    let p = phi.outputs();
    if phi.inputs() != p {
        return invalid("Weyl function must be square");
    }
    if phi.d.dist(&CMat::identity(p).scale(I)) > 1e-10 {
        return Err(Error::NotAdmissible("φ(λ) must tend to iI as λ → ∞".into()));
    }
    let wf = WeylFunction { realization: phi.clone(), halfplane: HalfPlane::Upper };
    let viol = wf.herglotz_violation();
    if viol > 1e-10 {
        return Err(Error::NotAdmissible(format!("φ is not Herglotz (violation {viol:.3e})")));
    }
    let r = reflection_from_weyl(&wf)?;
    if r.order() == 0 {
        return Ok(DiracSeed::zero(DiracKind::SelfAdjoint, p, p));
    }
    let x = solve_inverse_riccati(RiccatiForm::SaDirac, &r.a, &r.b, &r.c).map_err(to_admissible)?;
    let xh = sqrtm_posdef(&x)?;
    let xih = inv_sqrtm_posdef(&x)?;
    let a = &(&(&xih * &r.a) * &xh) + &(&(&(&xih * &r.b) * &r.b.adjoint()) * &xih).scale(I);
    let phi1 = &xih * &r.b;
    let phi2 = (&xh * &r.c.adjoint()).scale(-I);
    let seed = DiracSeed::pe(a, phi1, phi2)?;
    check_roundtrip(phi, &weyl_direct(&seed)?.realization, &halfplane_samples(HalfPlane::Upper))?;
    Ok(seed)
}

/// Skew-self-adjoint seed whose Weyl function is `φ` (strictly proper).
pub fn skew_weyl_inverse(phi: &Realization) -> Result<DiracSeed> {
    let p = phi.outputs();
    if phi.inputs() != p {
        return invalid("Weyl function must be square");
    }
    if phi.d.max_abs() > 1e-12 {
        return Err(Error::NotAdmissible("φ must be strictly proper".into()));
    }
    let r = phi.minimal()?;
    if r.order() == 0 {
        return Ok(DiracSeed::zero(DiracKind::SkewSelfAdjoint, p, p));
    }
    let x = solve_inverse_riccati(RiccatiForm::Skew, &r.a, &r.b, &r.c).map_err(to_admissible)?;
    let xh = sqrtm_posdef(&x)?;
    let xih = inv_sqrtm_posdef(&x)?;
    let phi1 = (&xh * &r.c.adjoint()).scale(I);
    let phi2 = &xih * &r.b;
    let a = &(&(&xih * &r.a) * &xh) + (&phi2 * &phi2.adjoint()).scale(I);
    let seed = DiracSeed::skew(a, phi1, phi2)?;
    check_roundtrip(phi, &skew_weyl_direct(&seed)?.realization, &halfplane_samples(HalfPlane::Lower))?;
    Ok(seed)
}

/// Transmission and reflection coefficients of a generalized seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scattering {
    pub t_l: Realization,
    pub r_l: Realization,
    pub t_r: Realization,
    pub r_r: Realization,
    pub omega: CMat,
    /// Last `x` of the doubling sequence and the final Cauchy difference.
    pub omega_x: f64,
    pub omega_step: f64,
}

/// `ω = lim (e^{-ixA} S(x) e^{ixA^*})^{-1}` with its convergence data.
///
/// Uses `e^{-ixA} S e^{ixA^*} = F^{-1} M F^{-*}` with `F = e^{2ixA}` and
/// `M = F S0 F^* + 2∫_0^x e^{2isA} Φ1 Φ1^* e^{-2isA^*} ds`, doubled in `x`.
pub fn omega_limit(seed: &DiracSeed) -> Result<(CMat, f64, f64)> {
    let n = seed.n();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), 0.0, 0.0));
    }
    let m2 = seed.a.scale(c64(0.0, 2.0));
    let mut f = expm(&m2, 1.0)?;
    let mut q = expm_gramian(&m2, &(&seed.phi1 * &seed.phi1.adjoint()).scale_re(2.0), 1.0)?;
    let mut x = 1.0;
    let mut prev: Option<CMat> = None;
    loop {
        let m = &(&(&f * &seed.s0) * &f.adjoint()) + &q;
        let z = &f.adjoint() * &solve_linear(&m, &f)?;
        if let Some(p) = &prev {
            let step = z.dist(p);
            if step <= OMEGA_TOL * z.norm_fro().max(1.0) {
                return Ok((z.hermitian_part(), x, step));
            }
        }
        if x >= OMEGA_CAP {
            return Err(Error::Numerical(format!("ω did not converge by x = {x}")));
        }
        q = &q + &(&(&f * &q) * &f.adjoint());
        f = &f * &f;
        x *= 2.0;
        prev = Some(z);
    }
}

/// `T_L`, `R_L`, `T_R`, `R_R` with `θ = A - i Φ1(0) Φ1(0)^* S0^{-1}`.
pub fn gpe_scattering(seed: &DiracSeed) -> Result<Scattering> {
    require_kind(seed, DiracKind::GeneralizedPe)?;
    let (n, p1, p2) = (seed.n(), seed.p1(), seed.p2());
    let (omega, omega_x, omega_step) = omega_limit(seed)?;
    let s0_inv = if n == 0 { CMat::zeros(0, 0) } else { crate::matcore::inverse(&seed.s0)? };
    let theta = &seed.a - &(&(&seed.phi1 * &seed.phi1.adjoint()) * &s0_inv).scale(I);
    let c1 = (&seed.phi1.adjoint() * &s0_inv).scale(-I);
    let c2 = (&seed.phi2.adjoint() * &s0_inv).scale(-I);
    let tail = &(&CMat::identity(n) - &(&seed.s0 * &omega)) * &seed.phi2;
    let t_l = Realization::new(theta.clone(), seed.phi1.clone(), c1.clone(), CMat::identity(p1))?;
    let r_l = Realization::new(theta.clone(), seed.phi1.clone(), c2.clone(), CMat::zeros(p2, p1))?;
    let t_r = Realization::new(theta.clone(), tail.clone(), c2, CMat::identity(p2))?;
    let r_r = Realization::new(
        CMat::block_diag(&[&theta, &seed.a.adjoint()]),
        CMat::vstack(&[&tail, &(&omega * &seed.phi2)]),
        CMat::hstack(&[&c1, &seed.phi1.adjoint().scale(-I)]),
        CMat::zeros(p1, p2),
    )?;
    Ok(Scattering { t_l, r_l, t_r, r_r, omega, omega_x, omega_step })
}

/// Largest spectral norm of `R(λ)` over `n` real sample points.
pub fn max_norm_on_real_axis(r: &Realization, n: usize) -> Result<f64> {
    let scale = r.a.norm_fro().max(1.0);
    let mut worst: f64 = 0.0;
    for lam in real_samples(n, scale) {
        let v = r.eval(lam)?;
        worst = worst.max(Svd::new(&v)?.s.first().copied().unwrap_or(0.0));
    }
    Ok(worst)
}

/// Generalized seed whose left reflection coefficient is `R`.
pub fn gpe_inverse(r: &Realization) -> Result<DiracSeed> {
    let (p2, p1) = r.d.shape();
    if r.d.max_abs() > 1e-12 {
        return Err(Error::NotAdmissible("R must be strictly proper".into()));
    }
    let norm = max_norm_on_real_axis(r, 100)
        .map_err(|e| Error::NotAdmissible(format!("R cannot be evaluated on the real axis: {e}")))?;
    if norm > 1.0 + 1e-9 {
        return Err(Error::NotAdmissible(format!("R is not contractive on the real axis (norm {norm:.6})")));
    }
    let m = r.minimal()?;
    if m.order() == 0 {
        return Ok(DiracSeed::zero(DiracKind::GeneralizedPe, p1, p2));
    }
    let x = solve_inverse_riccati(RiccatiForm::Gpe, &m.a, &m.b, &m.c).map_err(to_admissible)?;
    let s0 = crate::matcore::inverse(&x)?.hermitian_part();
    let a = &m.a + &(&(&m.b * &m.b.adjoint()) * &x).scale(I);
    let phi2 = (&s0 * &m.c.adjoint()).scale(-I);
    let seed = DiracSeed::gpe(a, s0, m.b.clone(), phi2)?;
    let back = gpe_scattering(&seed)?;
    check_roundtrip(r, &back.r_l, &real_samples(20, m.a.norm_fro().max(1.0)))?;
    Ok(seed)
}
