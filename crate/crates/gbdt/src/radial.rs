//! Radial Dirac system `u' + (λ q1 + q0) u = 0` with `q1 = -J̆` and
//! `q0 = v_* σ3 + J̆ (v_e I + v_s σ3)`, `v_* = κ/x + v_a`: explicit
//! potentials with a prescribed `κ/x` singularity and the single GBDT step
//! for a general `q0`.
//!
//! Near `x = 0` the matrix `S(x)` degenerates like powers of `x`. Explicit
//! nodes are therefore evaluated in a graded orthonormal basis in which `S`
//! and `Π` are rescaled by the powers of `x` they carry; for small `x ‖A‖`
//! the rescaled quantities come from their power series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{evolve_with, Coefficient, CoeffSample, EvolveOptions, GbdtState, RationalCoeffs};
use crate::matcore::{
    c64, eigh, expm, expm_gramian, hermitian_defect, j_breve, k_breve, min_eigenvalue, sigma3, solve_linear,
    CMat, GridSpec, OdeOptions, Svd, C64, I,
};
use crate::snode::SNode;

/// Relative tolerance of the seed identities.
pub const RADIAL_SEED_TOL: f64 = 1e-10;
/// Absolute tolerance for the strictly upper part of `𝒜2`.
pub const LOWER_TRIANGULAR_TOL: f64 = 1e-12;
/// Geometric range of the `κ` fit.
pub const KAPPA_FIT_RANGE: (f64, f64) = (1e-6, 1e-3);
/// Smallest `x` of the boundedness scan of `Υ`.
pub const BOUNDEDNESS_FLOOR: f64 = 1e-8;
/// Growth factor of `sup ‖Υ‖` between neighbouring decades that raises the alarm.
pub const GROWTH_ALARM: f64 = 2.0;

const GRADE_TOL: f64 = 1e-9;
const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 40;
const POSITIVITY_TOL: f64 = 1e-13;

/// `q0 = v_* σ3 + J̆ (v_e I + v_s σ3)`.
pub fn radial_q0(v_star: f64, v_e: f64, v_s: f64) -> CMat {
    let j = j_breve();
    &sigma3().scale_re(v_star) + &(&j * &(&CMat::identity(2).scale_re(v_e) + &sigma3().scale_re(v_s)))
}

/// Scalar parts of a radial coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialComponents {
    pub v_star: C64,
    pub v_e: C64,
    pub v_s: C64,
}

/// Inverts [`radial_q0`]: `q0 = [[v_*, v_e - v_s], [-v_e - v_s, -v_*]]`.
pub fn radial_components(q0: &CMat) -> RadialComponents {
    RadialComponents {
        v_star: (q0[(0, 0)] - q0[(1, 1)]).scale(0.5),
        v_e: (q0[(0, 1)] - q0[(1, 0)]).scale(0.5),
        v_s: -(q0[(0, 1)] + q0[(1, 0)]).scale(0.5),
    }
}

/// `J̆ X J̆^* - X`, the shift of `q0` produced by `X = Π^* S^{-1} Π`.
pub fn q0_shift(x: &CMat) -> CMat {
    let j = j_breve();
    &(&(&j * x) * &j.adjoint()) - x
}

/// Coefficients of `G = -(q0 + λ q1)` for the generic engine.
pub fn radial_coeffs(q0: Coefficient) -> RationalCoeffs {
    RationalCoeffs::new(2, vec![q0, Coefficient::Constant(-j_breve())], vec![]).expect("2x2 coefficients")
}

/// Node `(A, A^*, S, Π, Π J̆^*)`, whose identity reads `A S - S A^* = Π J̆ Π^*`.
pub fn radial_node(a: CMat, s: CMat, pi: CMat) -> Result<SNode> {
    let pi2 = &pi * &j_breve().adjoint();
    SNode::new_unchecked(a.clone(), a.adjoint(), s, pi, pi2)
}

/// Orientation of `h(0)`, the first row of `Ψ2(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `h(0) = c [1, 0]`.
    First,
    /// `h(0) = c [0, 1]`.
    Second,
}

impl Orientation {
    /// Orientation required for a singular coefficient `κ ≠ 0`: `[0, 1]`
    /// when `κ` is positive and odd or negative and even.
    pub fn for_kappa(kappa: i64) -> Option<Self> {
        if kappa == 0 {
            return None;
        }
        let odd = kappa % 2 != 0;
        Some(if (kappa > 0) == odd { Orientation::Second } else { Orientation::First })
    }

    /// `κ` produced by `ϰ` rows of `Ψ2` with this orientation.
    pub fn kappa(self, varkappa: usize) -> i64 {
        let k = varkappa as i64;
        let odd = varkappa % 2 == 1;
        match (self, odd) {
            (Orientation::Second, true) | (Orientation::First, false) => k,
            _ => -k,
        }
    }

    pub fn vector(self) -> [C64; 2] {
        match self {
            Orientation::First => [c64(1.0, 0.0), c64(0.0, 0.0)],
            Orientation::Second => [c64(0.0, 0.0), c64(1.0, 0.0)],
        }
    }

    fn detect(h: &[C64]) -> Option<Self> {
        let norm = (h[0].norm_sqr() + h[1].norm_sqr()).sqrt();
        if norm == 0.0 {
            None
        } else if h[1].norm() <= LOWER_TRIANGULAR_TOL * norm {
            Some(Orientation::First)
        } else if h[0].norm() <= LOWER_TRIANGULAR_TOL * norm {
            Some(Orientation::Second)
        } else {
            None
        }
    }
}

/// Parameters of an explicit radial potential with singular coefficient
/// `κ`: a regular part `(𝒜1, 𝒮1, Ψ1(0))` of order `m` and a lower
/// triangular `𝒜2` with `Ψ2(0)` of order `ϰ = |κ|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSeed {
    pub kappa: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(rename = "A1")]
    pub a1: CMat,
    #[serde(rename = "S1")]
    pub s1: CMat,
    #[serde(rename = "Psi1")]
    pub psi1: CMat,
    #[serde(rename = "A2")]
    pub a2: CMat,
    #[serde(rename = "Psi2")]
    pub psi2: CMat,
}

impl RadialSeed {
    pub fn new(kappa: i64, a1: CMat, s1: CMat, psi1: CMat, a2: CMat, psi2: CMat) -> Result<Self> {
        let seed = Self { kappa, orientation: Orientation::for_kappa(kappa), a1, s1, psi1, a2, psi2 };
        seed.validate()?;
        Ok(seed)
    }

    /// Seed without regular part whose rows of `Ψ2(0)` are `g_k` times the
    /// orientation vector required by `κ`.
    pub fn pure(kappa: i64, a2: CMat, g: &[C64]) -> Result<Self> {
        Self::new(kappa, CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, 2), a2, psi2_for(kappa, g)?)
    }

    /// The same regular part with `κ = 0`.
    pub fn regular_part(&self) -> Self {
        Self {
            kappa: 0,
            orientation: None,
            a1: self.a1.clone(),
            s1: self.s1.clone(),
            psi1: self.psi1.clone(),
            a2: CMat::zeros(0, 0),
            psi2: CMat::zeros(0, 2),
        }
    }

    pub fn m(&self) -> usize {
        self.a1.nrows()
    }

    pub fn varkappa(&self) -> usize {
        self.kappa.unsigned_abs() as usize
    }

    /// `‖𝒜1 𝒮1 - 𝒮1 𝒜1^* - Ψ1 J̆ Ψ1^*‖` and `‖Ψ2 J̆ Ψ2^*‖`, relative to
    /// the sizes of the terms.
    pub fn identity_defects(&self) -> (f64, f64) {
        let j = j_breve();
        let l = &(&self.a1 * &self.s1) - &(&self.s1 * &self.a1.adjoint());
        let r = &(&self.psi1 * &j) * &self.psi1.adjoint();
        let d1 = l.dist(&r) / (1.0 + l.norm_fro() + r.norm_fro());
        let d2 = (&(&self.psi2 * &j) * &self.psi2.adjoint()).norm_fro() / (1.0 + self.psi2.norm_fro().powi(2));
        (d1, d2)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, k) = (self.m(), self.varkappa());
        if self.a1.shape() != (m, m) || self.s1.shape() != (m, m) || self.psi1.shape() != (m, 2) {
            return invalid(format!("regular part needs A1, S1 of size {m}x{m} and Psi1 of size {m}x2"));
        }
        if self.a2.shape() != (k, k) || self.psi2.shape() != (k, 2) {
            return invalid(format!("kappa = {} needs A2 of size {k}x{k} and Psi2 of size {k}x2", self.kappa));
        }
        let all = [&self.a1, &self.s1, &self.psi1, &self.a2, &self.psi2];
        if !all.iter().all(|mat| mat.is_finite()) {
            return invalid("seed has non-finite entries");
        }
        if m > 0 {
            if hermitian_defect(&self.s1) > RADIAL_SEED_TOL {
                return invalid("S1 must be Hermitian");
            }
            if min_eigenvalue(&self.s1.hermitian_part())? <= 0.0 {
                return Err(Error::NotAdmissible("S1 must be positive definite".into()));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if self.a2[(i, j)].norm() > LOWER_TRIANGULAR_TOL {
                    return invalid("A2 must be lower triangular");
                }
            }
        }
        let (d1, d2) = self.identity_defects();
        let worst = d1.max(d2);
        if worst > RADIAL_SEED_TOL {
            return Err(Error::IdentityViolation { residual: worst, tolerance: RADIAL_SEED_TOL });
        }
        if self.orientation != Orientation::for_kappa(self.kappa) {
            return invalid("orientation does not match the parity rule for kappa");
        }
        if let Some(o) = self.orientation {
            match Orientation::detect(self.psi2.row(0)) {
                Some(h) if h == o => {}
                _ => {
                    let v = if o == Orientation::First { "[1, 0]" } else { "[0, 1]" };
                    return Err(Error::NotAdmissible(format!(
                        "kappa = {} requires the first row of Psi2 to be a nonzero multiple of {v}",
                        self.kappa
                    )));
                }
            }
        }
        Ok(())
    }

    /// `A = [[𝒜1, 0], [R, 𝒜2]]` with `R = Ψ2 J̆ Ψ1^* 𝒮1^{-1}`.
    pub fn a_matrix(&self) -> Result<CMat> {
        let (m, k) = (self.m(), self.varkappa());
        let mut a = CMat::zeros(m + k, m + k);
        a.set_block(0, 0, &self.a1);
        a.set_block(m, m, &self.a2);
        if m > 0 && k > 0 {
            let rhs = (&(&self.psi2 * &j_breve()) * &self.psi1.adjoint()).adjoint();
            let r = solve_linear(&self.s1, &rhs)?.adjoint();
            a.set_block(m, 0, &r);
        }
        Ok(a)
    }

    /// Explicit node with `S(0) = diag(𝒮1, 0)` and `Π(0) = [Ψ1; Ψ2]`.
    pub fn explicit(&self) -> Result<ExplicitRadial> {
        self.validate()?;
        let (m, k) = (self.m(), self.varkappa());
        let s0 = CMat::block_diag(&[&self.s1, &CMat::zeros(k, k)]);
        ExplicitRadial::new(self.a_matrix()?, s0, CMat::vstack(&[&self.psi1, &self.psi2]))
            .map(|e| ExplicitRadial { split: Some(m), ..e })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("seed serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut seed: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("radial seed JSON: {e}")))?;
        if seed.orientation.is_none() {
            seed.orientation = Orientation::for_kappa(seed.kappa);
        }
        // An empty JSON matrix carries no column count.
        for psi in [&mut seed.psi1, &mut seed.psi2] {
            if psi.nrows() == 0 {
                *psi = CMat::zeros(0, 2);
            }
        }
        seed.validate()?;
        Ok(seed)
    }
}

/// `Ψ2(0)` with rows `g_k v`, `v` the orientation vector required by `κ`.
pub fn psi2_for(kappa: i64, g: &[C64]) -> Result<CMat> {
    let k = kappa.unsigned_abs() as usize;
    if g.len() != k {
        return invalid(format!("kappa = {kappa} needs {k} row weights, got {}", g.len()));
    }
    let Some(o) = Orientation::for_kappa(kappa) else {
        return Ok(CMat::zeros(0, 2));
    };
    let v = o.vector();
    Ok(CMat::from_fn(k, 2, |i, j| g[i] * v[j]))
}

/// Orthonormal basis graded by the power of `x` each direction carries in
/// `S(x)`: directions in the range of `S(0)` first, then the new directions
/// of `Y_k = [(iA)^k θ1, (-iA)^k θ2]` for `k = 0, 1, ...`.
#[derive(Clone, Debug)]
struct Grading {
    b: CMat,
    level: Vec<usize>,
    d: Vec<f64>,
    yhat: Vec<CMat>,
    s0hat: CMat,
}

impl Grading {
    fn new(a: &CMat, s0: &CMat, theta: &CMat) -> Result<Self> {
        let n = a.nrows();
        let mut cols: Vec<Vec<C64>> = Vec::new();
        let mut level = Vec::new();
        let mut d = Vec::new();
        let push = |cols: &mut Vec<Vec<C64>>, mut v: Vec<C64>| -> bool {
            for _ in 0..2 {
                for c in cols.iter() {
                    let p: C64 = c.iter().zip(&v).map(|(ci, vi)| ci.conj() * vi).sum();
                    v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= p * ci);
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 0.5 {
                return false;
            }
            cols.push(v.into_iter().map(|z| z / norm).collect());
            true
        };
        if n > 0 {
            let (vals, vecs) = eigh(&s0.hermitian_part())?;
            let top = vals.last().copied().unwrap_or(0.0);
            for (k, &v) in vals.iter().enumerate().rev() {
                if top > 0.0 && v > GRADE_TOL * top && push(&mut cols, vecs.col(k)) {
                    level.push(0);
                    d.push(0.0);
                }
            }
        }
        let ia = a.scale(I);
        let mut y = theta.clone();
        let scale = theta.norm_fro().max(f64::MIN_POSITIVE);
        let mut k = 0;
        while cols.len() < n && k <= n {
            let b = basis(n, &cols);
            let r = &y - &(&b * &(&b.adjoint() * &y));
            let r = &r - &(&b * &(&b.adjoint() * &r));
            let sv = Svd::new(&r)?;
            let thresh = GRADE_TOL * y.norm_fro().max(scale);
            for (i, &s) in sv.s.iter().enumerate() {
                if s > thresh && cols.len() < n && push(&mut cols, sv.u.col(i)) {
                    level.push(k);
                    d.push(k as f64 + 0.5);
                }
            }
            y = next_y(&ia, &y);
            k += 1;
        }
        if cols.len() < n {
            return Err(Error::NotAdmissible(
                "S(x) is singular for every x: S(0) and the orbit of Pi(0) under A do not span the state space".into(),
            ));
        }
        let b = basis(n, &cols);
        let mut yhat = Vec::with_capacity(SERIES_TERMS);
        let mut y = theta.clone();
        for k in 0..SERIES_TERMS {
            let mut h = &b.adjoint() * &y;
            for (r, &l) in level.iter().enumerate() {
                if l > k {
                    h[(r, 0)] = c64(0.0, 0.0);
                    h[(r, 1)] = c64(0.0, 0.0);
                }
            }
            yhat.push(h);
            y = next_y(&ia, &y);
        }
        let mut s0hat = &(&b.adjoint() * s0) * &b;
        for r in 0..n {
            for c in 0..n {
                if d[r] != 0.0 || d[c] != 0.0 {
                    s0hat[(r, c)] = c64(0.0, 0.0);
                }
            }
        }
        Ok(Self { b, level, d, yhat, s0hat })
    }

    fn powers(&self, x: f64) -> Vec<f64> {
        self.d.iter().map(|&d| x.powf(d)).collect()
    }
}

fn basis(n: usize, cols: &[Vec<C64>]) -> CMat {
    CMat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn next_y(ia: &CMat, y: &CMat) -> CMat {
    let c1 = ia * &y.columns(0, 1);
    let c2 = -(ia * &y.columns(1, 1));
    CMat::hstack(&[&c1, &c2])
}

/// `diag(w) M` for a weight per row.
fn scale_rows(m: &CMat, w: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].scale(w[i]))
}

/// `Π` and `S` in the graded basis: `Π = B D Ê K̆^*`, `S = B D Ŝ D B^*`.
#[derive(Clone, Debug)]
struct Scaled {
    e: CMat,
    s: CMat,
    dpow: Vec<f64>,
}

/// Explicit node of the radial system with `q0 = 0`:
/// `Π(x) = [e^{ixA} θ1, e^{-ixA} θ2] K̆^*` and
/// `S(x) = S(0) + ∫_0^x Π Π^*`, where `[θ1, θ2] = Π(0) K̆`.
#[derive(Clone, Debug)]
pub struct ExplicitRadial {
    a: CMat,
    s0: CMat,
    pi0: CMat,
    theta: CMat,
    grading: Grading,
    a_norm: f64,
    split: Option<usize>,
}

impl ExplicitRadial {
    /// Requires `S(0) ⪰ 0` and `A S(0) - S(0) A^* = Π(0) J̆ Π(0)^*`.
    pub fn new(a: CMat, s0: CMat, pi0: CMat) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || s0.shape() != (n, n) || pi0.shape() != (n, 2) {
            return invalid(format!("need A, S(0) of size {n}x{n} and Pi(0) of size {n}x2"));
        }
        if !a.is_finite() || !s0.is_finite() || !pi0.is_finite() {
            return invalid("node has non-finite entries");
        }
        if n > 0 {
            if hermitian_defect(&s0) > RADIAL_SEED_TOL {
                return invalid("S(0) must be Hermitian");
            }
            let s0n = s0.norm_fro();
            if min_eigenvalue(&s0.hermitian_part())? < -RADIAL_SEED_TOL * s0n.max(1.0) {
                return Err(Error::NotAdmissible("S(0) must be positive semidefinite".into()));
            }
        }
        let node = radial_node(a.clone(), s0.clone(), pi0.clone())?;
        let res = node.identity_residual();
        if res > RADIAL_SEED_TOL {
            return Err(Error::IdentityViolation { residual: res, tolerance: RADIAL_SEED_TOL });
        }
        let theta = &pi0 * &k_breve();
        let grading = Grading::new(&a, &s0, &theta)?;
        let a_norm = a.norm_fro();
        Ok(Self { a, s0, pi0, theta, grading, a_norm, split: None })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
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

    /// Size of the regular block when built from a [`RadialSeed`].
    pub fn split(&self) -> Option<usize> {
        self.split
    }

    fn scaled(&self, x: f64) -> Result<Scaled> {
        if !(x > 0.0) || !x.is_finite() {
            return invalid(format!("radial evaluation needs x > 0, got {x}"));
        }
        let g = &self.grading;
        let n = self.n();
        let dpow = g.powers(x);
        let (e, s) = if x * self.a_norm <= SERIES_RADIUS {
            self.series(x)
        } else {
            let ia = self.a.scale(I);
            let t1 = self.theta.columns(0, 1);
            let t2 = self.theta.columns(1, 1);
            let e = CMat::hstack(&[&(&expm(&ia, x)? * &t1), &(&expm(&-&ia, x)? * &t2)]);
            let s = &(&self.s0 + &expm_gramian(&ia, &(&t1 * &t1.adjoint()), x)?)
                + &expm_gramian(&-&ia, &(&t2 * &t2.adjoint()), x)?;
            let inv: Vec<f64> = dpow.iter().map(|p| 1.0 / p).collect();
            let bs = scale_rows(&(&g.b.adjoint() * &s), &inv);
            let sh = scale_rows(&(&g.b.adjoint() * &bs.adjoint()), &inv);
            (scale_rows(&(&g.b.adjoint() * &e), &inv), sh)
        };
        let s = s.hermitian_part();
        if n > 0 {
            let low = min_eigenvalue(&s)?;
            if !(low > POSITIVITY_TOL * s.norm_fro()) {
                return Err(Error::NotAdmissible(format!("S(x) is not positive definite at x = {x}")));
            }
        }
        Ok(Scaled { e, s, dpow })
    }

    fn series(&self, x: f64) -> (CMat, CMat) {
        let g = &self.grading;
        let n = self.n();
        let mut fact = vec![1.0f64; SERIES_TERMS];
        for k in 1..SERIES_TERMS {
            fact[k] = fact[k - 1] * k as f64;
        }
        let e = CMat::from_fn(n, 2, |r, col| {
            (g.level[r]..SERIES_TERMS).map(|k| g.yhat[k][(r, col)].scale(x.powf(k as f64 - g.d[r]) / fact[k])).sum()
        });
        let s = CMat::from_fn(n, n, |r, c| {
            let mut acc = g.s0hat[(r, c)];
            for j in g.level[r]..SERIES_TERMS {
                for l in g.level[c]..SERIES_TERMS {
                    let w = x.powf((j + l + 1) as f64 - g.d[r] - g.d[c]) / (fact[j] * fact[l] * (j + l + 1) as f64);
                    if w == 0.0 {
                        continue;
                    }
                    let yj = &g.yhat[j];
                    let yl = &g.yhat[l];
                    acc += (yj[(r, 0)] * yl[(c, 0)].conj() + yj[(r, 1)] * yl[(c, 1)].conj()).scale(w);
                }
            }
            acc
        });
        (e, s)
    }

    /// `Π(x)`.
    pub fn pi_at(&self, x: f64) -> Result<CMat> {
        let sc = self.scaled(x)?;
        Ok(&(&self.grading.b * &scale_rows(&sc.e, &sc.dpow)) * &k_breve().adjoint())
    }

    /// `S(x)`.
    pub fn s_at(&self, x: f64) -> Result<CMat> {
        let sc = self.scaled(x)?;
        let bd = scale_rows(&self.grading.b.adjoint(), &sc.dpow).adjoint();
        Ok((&(&bd * &sc.s) * &bd.adjoint()).hermitian_part())
    }

    pub fn node_at(&self, x: f64) -> Result<SNode> {
        radial_node(self.a.clone(), self.s_at(x)?, self.pi_at(x)?)
    }

    /// `X = Π^* S^{-1} Π`.
    pub fn x_matrix(&self, x: f64) -> Result<CMat> {
        let sc = self.scaled(x)?;
        let k = k_breve();
        let core = &sc.e.adjoint() * &solve_linear(&sc.s, &sc.e)?;
        Ok((&(&k * &core) * &k.adjoint()).hermitian_part())
    }

    /// `q̃0(x) = J̆ X J̆^* - X`.
    pub fn q0_tilde(&self, x: f64) -> Result<CMat> {
        Ok(q0_shift(&self.x_matrix(x)?))
    }

    /// `ṽ_* = X22 - X11`, `ṽ_e = 0` and `ṽ_s = X12 + X21`.
    pub fn components(&self, x: f64) -> Result<RadialComponents> {
        Ok(radial_components(&self.q0_tilde(x)?))
    }

    /// `w_A(x,λ) = I - J̆ Π^* S^{-1} (A - λ)^{-1} Π`.
    pub fn transfer(&self, x: f64, lambda: C64) -> Result<CMat> {
        let sc = self.scaled(x)?;
        let b = &self.grading.b;
        let k = k_breve();
        let pi = &(b * &scale_rows(&sc.e, &sc.dpow)) * &k.adjoint();
        let z = solve_linear(&self.a.shift(lambda), &pi)
            .map_err(|_| Error::NearPole(format!("lambda = {lambda} lies in the spectrum of A")))?;
        let inv: Vec<f64> = sc.dpow.iter().map(|p| 1.0 / p).collect();
        let zh = scale_rows(&(&b.adjoint() * &z), &inv);
        let core = &(&k * &sc.e.adjoint()) * &solve_linear(&sc.s, &zh)?;
        Ok(&CMat::identity(2) - &(&j_breve() * &core))
    }

    /// `ũ(x,λ) = w_A(x,λ) K̆ e^{-iλxσ3}`.
    pub fn fundamental(&self, x: f64, lambda: C64) -> Result<CMat> {
        let z = -I * lambda * x;
        let free = &k_breve() * &CMat::from_diag(&[z.exp(), (-z).exp()]);
        Ok(&self.transfer(x, lambda)? * &free)
    }

    /// `Υ(x) = q̃0(x) - (κ/x) σ3`.
    pub fn upsilon(&self, x: f64, kappa: f64) -> Result<CMat> {
        Ok(&self.q0_tilde(x)? - &sigma3().scale_re(kappa / x))
    }

    /// Least-squares fit of `x (X22 - X11) ≈ κ + b x` on a geometric grid
    /// over [`KAPPA_FIT_RANGE`]; returns `κ`.
    pub fn kappa_fit(&self) -> Result<f64> {
        let (lo, hi) = KAPPA_FIT_RANGE;
        let npts = 31;
        let xs: Vec<f64> = (0..npts).map(|i| lo * (hi / lo).powf(i as f64 / (npts - 1) as f64)).collect();
        let ys: Vec<f64> = xs
            .par_iter()
            .map(|&x| Ok(x * self.components(x)?.v_star.re))
            .collect::<Result<_>>()?;
        let nf = npts as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let det = nf * sxx - sx * sx;
        Ok((sxx * sy - sx * sxy) / det)
    }

    /// Decade-by-decade sup of `‖Υ‖` from `x_top` down to
    /// [`BOUNDEDNESS_FLOOR`].
    pub fn boundedness(&self, kappa: f64, x_top: f64) -> Result<Boundedness> {
        if !(x_top > BOUNDEDNESS_FLOOR) {
            return invalid(format!("boundedness scan needs x_top > {BOUNDEDNESS_FLOOR}"));
        }
        let per_decade = 9;
        let mut decades = Vec::new();
        let mut hi = x_top;
        while hi > BOUNDEDNESS_FLOOR * (1.0 + 1e-9) {
            let lo = (hi / 10.0).max(BOUNDEDNESS_FLOOR);
            let sup = (0..per_decade)
                .into_par_iter()
                .map(|i| {
                    let x = hi * (lo / hi).powf(i as f64 / (per_decade - 1) as f64);
                    Ok(self.upsilon(x, kappa)?.norm_fro())
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            decades.push(Decade { lo, hi, sup });
            hi = lo;
        }
        let max = decades.iter().map(|d| d.sup).fold(0.0, f64::max);
        let floor = 1e-6 * (1.0 + max);
        let alarm = decades.windows(2).any(|w| w[1].sup > GROWTH_ALARM * w[0].sup.max(floor));
        Ok(Boundedness { decades, max, alarm })
    }
}

/// `sup ‖Υ‖` over `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decade {
    pub lo: f64,
    pub hi: f64,
    pub sup: f64,
}

/// Result of the boundedness scan of `Υ`; `alarm` is set when the sup over
/// a decade exceeds [`GROWTH_ALARM`] times the sup over the decade above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub decades: Vec<Decade>,
    pub max: f64,
    pub alarm: bool,
}

/// Explicit potential on a grid together with the boundedness scan.
#[derive(Clone, Debug)]
pub struct RadialConstruction {
    pub kappa: i64,
    /// Samples of `q̃0` with extra columns `v_a`, `v_s` and `v_star`.
    pub field: SolutionGrid,
    pub boundedness: Boundedness,
}

impl RadialConstruction {
    /// Samples of `Υ = q̃0 - (κ/x) σ3` with extra columns `v_a` and `v_s`.
    pub fn upsilon_grid(&self) -> Result<SolutionGrid> {
        let grid = self.field.grid;
        let values = self
            .field
            .values()
            .iter()
            .zip(grid.xs())
            .map(|(q, x)| q - &sigma3().scale_re(self.kappa as f64 / x))
            .collect();
        let mut out = SolutionGrid::new("radial", grid, values)?;
        for name in ["v_a", "v_s"] {
            out.add_extra(name, self.field.extra(name).expect("extra column").to_vec())?;
        }
        Ok(out)
    }
}

/// `q̃0` on a 1-D grid in `(0, x1]` for an explicit seed, with
/// `ṽ_a = X22 - X11 - κ/x` and `ṽ_s = X12 + X21`.
pub fn radial_construct(seed: &RadialSeed, grid: &GridSpec) -> Result<RadialConstruction> {
    grid.validate()?;
    if grid.has_t() || !(grid.x0 > 0.0) {
        return invalid("radial grids are one-dimensional with x0 > 0");
    }
    let node = seed.explicit()?;
    let kappa = seed.kappa as f64;
    let xs = grid.xs();
    let samples: Vec<(CMat, RadialComponents)> = xs
        .par_iter()
        .map(|&x| {
            let q = node.q0_tilde(x)?;
            let c = radial_components(&q);
            Ok((q, c))
        })
        .collect::<Result<_>>()?;
    let v_a = samples.iter().zip(&xs).map(|((_, c), x)| c.v_star.re - kappa / x).collect();
    let v_s = samples.iter().map(|(_, c)| c.v_s.re).collect();
    let v_star = samples.iter().map(|(_, c)| c.v_star.re).collect();
    let mut field = SolutionGrid::new("radial", *grid, samples.into_iter().map(|(q, _)| q).collect())?;
    field.add_extra("v_a", v_a)?;
    field.add_extra("v_s", v_s)?;
    field.add_extra("v_star", v_star)?;
    let boundedness = node.boundedness(kappa, grid.x1.min(1.0))?;
    Ok(RadialConstruction { kappa: seed.kappa, field, boundedness })
}

/// `ũ(x,λ) = w_A(x,λ) K̆ e^{-iλxσ3}` for an explicit seed.
pub fn radial_fundamental(seed: &RadialSeed, x: f64, lambda: C64) -> Result<CMat> {
    seed.explicit()?.fundamental(x, lambda)
}

/// Step options accurate enough for the radial comparisons.
pub fn radial_evolution() -> EvolveOptions {
    EvolveOptions { ode: OdeOptions { substeps: 2, halving_tol: Some(1e-12) } }
}

/// One GBDT step for a general radial coefficient.
#[derive(Clone, Debug)]
pub struct RadialStep {
    coeffs: RationalCoeffs,
    state: GbdtState,
}

/// Evolves `(A, S(x0), Π(x0))` along the 1-D `grid` with `Π' = A Π q1 + Π q0`
/// and `S' = Π Π^*`.
pub fn radial_gbdt_step(q0: Coefficient, a: CMat, s0: CMat, pi0: CMat, grid: &GridSpec) -> Result<RadialStep> {
    if grid.has_t() {
        return invalid("radial grids are one-dimensional");
    }
    let coeffs = radial_coeffs(q0);
    let node = radial_node(a, s0, pi0)?;
    let state = evolve_with(&coeffs, &node, grid, radial_evolution())?;
    Ok(RadialStep { coeffs, state })
}

impl RadialStep {
    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.state.points()[i]
    }

    pub fn state(&self) -> &GbdtState {
        &self.state
    }

    pub fn coeffs(&self) -> &RationalCoeffs {
        &self.coeffs
    }

    pub fn s(&self, i: usize) -> &CMat {
        self.state.s(i)
    }

    pub fn pi(&self, i: usize) -> &CMat {
        self.state.pi1(i)
    }

    /// `q0` at sample `i`.
    pub fn q0(&self, i: usize) -> Result<CMat> {
        Ok(self.coeffs.sample(self.x(i), 0.0)?.poly[0].clone())
    }

    /// `X = Π^* S^{-1} Π` at sample `i`.
    pub fn x_matrix(&self, i: usize) -> Result<CMat> {
        let pi = self.pi(i);
        Ok(&pi.adjoint() * &solve_linear(self.s(i), pi)?)
    }

    /// Transformed `q̃0` at sample `i`.
    pub fn q0_tilde(&self, i: usize) -> Result<CMat> {
        let t: CoeffSample = self.state.transformed_coeffs(&self.coeffs, i)?;
        Ok(t.poly[0].clone())
    }

    pub fn components(&self, i: usize) -> Result<RadialComponents> {
        Ok(radial_components(&self.q0_tilde(i)?))
    }

    /// `q̃0` as a coefficient interpolated between the samples.
    pub fn transformed_coefficient(&self) -> Result<Coefficient> {
        let values = (0..self.len()).map(|i| self.q0_tilde(i)).collect::<Result<_>>()?;
        Coefficient::sampled(self.state.points().to_vec(), values)
    }

    /// Darboux matrix `w_A(x_i, λ)`.
    pub fn transfer(&self, i: usize, lambda: C64) -> Result<CMat> {
        self.state.transfer_eval(i, lambda)
    }

    /// Residual of `w' = G̃ w - w G`.
    pub fn darboux_residual(&self, lambda: C64) -> Result<crate::residuals::ResidualReport> {
        self.state.darboux_residual(&self.coeffs, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_closed_form_agree() {
        let seed = RadialSeed::pure(
            2,
            CMat::from_rows(&[vec![c64(0.3, 0.0), c64(0.0, 0.0)], vec![c64(0.5, 0.1), c64(-0.2, 0.0)]]).unwrap(),
            &[c64(1.0, 0.0), c64(0.5, 0.5)],
        )
        .unwrap();
        let node = seed.explicit().unwrap();
        let x = 0.99 * SERIES_RADIUS / node.a_norm;
        let series = node.x_matrix(x).unwrap();
        let mut far = node.clone();
        far.a_norm = f64::INFINITY;
        let direct = far.x_matrix(x).unwrap();
        assert!(series.dist(&direct) <= 1e-9 * direct.norm_fro(), "{}", series.dist(&direct));
    }

    #[test]
    fn orientation_table() {
        assert_eq!(Orientation::for_kappa(1), Some(Orientation::Second));
        assert_eq!(Orientation::for_kappa(2), Some(Orientation::First));
        assert_eq!(Orientation::for_kappa(-1), Some(Orientation::First));
        assert_eq!(Orientation::for_kappa(-2), Some(Orientation::Second));
        for k in [-3i64, -2, -1, 1, 2, 3] {
            let o = Orientation::for_kappa(k).unwrap();
            assert_eq!(o.kappa(k.unsigned_abs() as usize), k);
        }
    }
}
