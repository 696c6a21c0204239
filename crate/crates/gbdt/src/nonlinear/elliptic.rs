//! Elliptic sine-Gordon `v_tt + v_xx = sin v` and sinh-Gordon
//! `v_tt + v_xx = sinh v`: new real solutions from a known one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dirac::check_invertible;
use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{evolve2d, Coefficient, GbdtField, PolePart, RationalCoeffs};
use crate::matcore::{c64, inverse, solve_sylvester, CMat, GridSpec, C64};
use crate::snode::SNode;

use super::relative;

/// Relative tolerance for the seed identity and conjugation symmetry.
pub const ELLIPTIC_SEED_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllipticVariant {
    SineGordon,
    SinhGordon,
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Known real solution `v` with its partial derivatives.
#[derive(Clone)]
pub struct ScalarBackground {
    pub v: ScalarFn,
    pub vx: ScalarFn,
    pub vt: ScalarFn,
}

impl std::fmt::Debug for ScalarBackground {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarBackground(..)")
    }
}

impl ScalarBackground {
    pub fn new(
        v: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        vx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        vt: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { v: Arc::new(v), vx: Arc::new(vx), vt: Arc::new(vt) }
    }

    /// `v ≡ 0`, a solution of both equations.
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }
}

fn j() -> CMat {
    CMat::from_real_diag(&[1.0, -1.0])
}

fn big_j() -> CMat {
    CMat::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// `ζ = [[0, e^{-iv/2}], [e^{iv/2}, 0]]` for sine-Gordon and
/// `[[0, e^{-v/2}], [e^{v/2}, 0]]` for sinh-Gordon.
pub fn zeta(variant: EllipticVariant, v: f64) -> CMat {
    let (lo, hi) = match variant {
        EllipticVariant::SineGordon => (C64::from_polar(1.0, -v / 2.0), C64::from_polar(1.0, v / 2.0)),
        EllipticVariant::SinhGordon => (c64((-v / 2.0).exp(), 0.0), c64((v / 2.0).exp(), 0.0)),
    };
    CMat::from_rows(&[vec![c64(0.0, 0.0), lo], vec![hi, c64(0.0, 0.0)]]).expect("2x2")
}

type MatFn = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

fn scaled(c: C64, g: MatFn) -> Coefficient {
    Coefficient::function(move |x, t| g(x, t).scale(c))
}

/// Coefficients of the auxiliary pair `G`, `F` for `variant` about the
/// background `v`; both have a simple pole at `0`.
pub fn elliptic_coeffs(variant: EllipticVariant, bg: &ScalarBackground) -> (RationalCoeffs, RationalCoeffs) {
    let (v, vx, vt) = (bg.v.clone(), bg.vx.clone(), bg.vt.clone());
    let z: MatFn = Arc::new(move |x, t| zeta(variant, v(x, t)));
    let q = 0.25;
    let (c1, c0, pole, d1, d0, dpole, pole_fn): (C64, C64, C64, C64, C64, C64, MatFn) = match variant {
        EllipticVariant::SineGordon => {
            let z = z.clone();
            let jzj: MatFn = Arc::new(move |x, t| &(&big_j() * &z(x, t)) * &big_j());
            (c64(0.0, -q), c64(-q, 0.0), c64(0.0, q), c64(q, 0.0), c64(q, 0.0), c64(q, 0.0), jzj)
        }
        EllipticVariant::SinhGordon => {
            let z = z.clone();
            let za: MatFn = Arc::new(move |x, t| z(x, t).adjoint());
            (c64(q, 0.0), c64(0.0, -q), c64(q, 0.0), c64(0.0, -q), c64(0.0, q), c64(0.0, q), za)
        }
    };
    let at_zero = |c: C64, g: MatFn| vec![PolePart { c: c64(0.0, 0.0), parts: vec![scaled(c, g)] }];
    let g = RationalCoeffs::new(
        2,
        vec![Coefficient::function(move |x, t| j().scale(c0 * vt(x, t))), scaled(c1, z.clone())],
        at_zero(pole, pole_fn.clone()),
    );
    let f = RationalCoeffs::new(
        2,
        vec![Coefficient::function(move |x, t| j().scale(d0 * vx(x, t))), scaled(d1, z)],
        at_zero(dpole, pole_fn),
    );
    (g.expect("single pole"), f.expect("single pole"))
}

/// Parameters `A`, `S(0,0)`, `Π(0,0)` and the conjugation matrix `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticSeed {
    pub variant: EllipticVariant,
    #[serde(rename = "A")]
    pub a: CMat,
    #[serde(rename = "S0")]
    pub s0: CMat,
    #[serde(rename = "Pi0")]
    pub pi0: CMat,
    #[serde(rename = "U")]
    pub u: CMat,
}

impl EllipticSeed {
    pub fn new(variant: EllipticVariant, a: CMat, s0: CMat, pi0: CMat, u: CMat) -> Result<Self> {
        let seed = Self { variant, a, s0, pi0, u };
        seed.validate()?;
        Ok(seed)
    }

    /// Seed with `S(0,0)` solved from the identity, which requires
    /// `σ(A)` and `σ(-(A^*)^{-1})` to be disjoint.
    pub fn from_parameters(variant: EllipticVariant, a: CMat, pi0: CMat, u: CMat) -> Result<Self> {
        let rhs = identity_rhs(variant, &pi0);
        let a_inv = inverse(&a)?;
        let s0 = solve_sylvester(&a_inv, &a.adjoint().scale_re(-1.0), &(&a_inv * &rhs))?.hermitian_part();
        Self::new(variant, a, s0, pi0, u)
    }

    /// Two-state seed `A = diag(a, 1/ā)` with `U` the swap, and
    /// `Π(0,0) = [[p, q], [p̄, q̄]]` (sine-Gordon) or `[[p, q], [q̄, p̄]]`
    /// (sinh-Gordon).
    pub fn two_state(variant: EllipticVariant, a: C64, p: C64, q: C64) -> Result<Self> {
        let am = CMat::from_diag(&[a, a.conj().inv()]);
        let second = match variant {
            EllipticVariant::SineGordon => vec![p.conj(), q.conj()],
            EllipticVariant::SinhGordon => vec![q.conj(), p.conj()],
        };
        let pi0 = CMat::from_rows(&[vec![p, q], second])?;
        Self::from_parameters(variant, am, pi0, big_j())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `A S A^* + S - Π J Π^*` (sine-Gordon) or `A S A^* + S - Π Π^*`
    /// (sinh-Gordon) at the origin.
    pub fn identity_defect(&self) -> CMat {
        let lhs = &(&(&self.a * &self.s0) * &self.a.adjoint()) + &self.s0;
        &lhs - &identity_rhs(self.variant, &self.pi0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !self.a.is_square() || self.s0.shape() != (n, n) || self.pi0.shape() != (n, 2) || self.u.shape() != (n, n) {
            return invalid("A, S0, U must be n x n and Pi0 n x 2");
        }
        if !(self.a.is_finite() && self.s0.is_finite() && self.pi0.is_finite() && self.u.is_finite()) {
            return invalid("seed has non-finite entries");
        }
        let a_inv = inverse(&self.a).map_err(|_| Error::InvalidInput("A must be invertible".into()))?;
        let u_inv = inverse(&self.u).map_err(|_| Error::InvalidInput("U must be invertible".into()))?;
        let an = self.a.norm_fro();
        let (sn, pn) = (self.s0.norm_fro(), self.pi0.norm_fro());
        if self.s0.dist(&self.s0.adjoint()) > ELLIPTIC_SEED_TOL * sn.max(1.0) {
            return invalid("S0 must be Hermitian");
        }
        let residual = relative(self.identity_defect().norm_fro(), &[an * an * sn + sn, pn * pn]);
        if residual > ELLIPTIC_SEED_TOL {
            return Err(Error::IdentityViolation { residual, tolerance: ELLIPTIC_SEED_TOL });
        }
        let un = self.u.norm_fro() * u_inv.norm_fro();
        let sym_a = relative(self.a.conj().dist(&(&(&self.u * &a_inv) * &u_inv)), &[an, un * a_inv.norm_fro()]);
        let pi_rhs = match self.variant {
            EllipticVariant::SineGordon => &self.u * &self.pi0,
            EllipticVariant::SinhGordon => &(&self.u * &self.pi0) * &big_j(),
        };
        let sym_pi = relative(self.pi0.conj().dist(&pi_rhs), &[pn, self.u.norm_fro() * pn]);
        let s_rhs = &(&(&(&self.u * &self.a) * &self.s0) * &self.a.adjoint()) * &self.u.adjoint();
        let sym_s = relative(self.s0.conj().dist(&s_rhs), &[sn, s_rhs.norm_fro()]);
        let worst = sym_a.max(sym_pi).max(sym_s);
        if worst > ELLIPTIC_SEED_TOL {
            return Err(Error::InvalidInput(format!("conjugation symmetry violated by {worst:.3e}")));
        }
        Ok(())
    }

    /// Node `(A, -(A^*)^{-1}, S0, Π0, Π2)` with `Π2 = A^{-1} Π0 J`
    /// (sine-Gordon) or `A^{-1} Π0` (sinh-Gordon).
    pub fn node(&self) -> Result<SNode> {
        let a_inv = inverse(&self.a)?;
        let a2 = -inverse(&self.a.adjoint())?;
        let pi2 = match self.variant {
            EllipticVariant::SineGordon => &(&a_inv * &self.pi0) * &big_j(),
            EllipticVariant::SinhGordon => &a_inv * &self.pi0,
        };
        SNode::new(self.a.clone(), a2, self.s0.clone(), self.pi0.clone(), pi2)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("seed serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seed: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("elliptic seed JSON: {e}")))?;
        seed.validate()?;
        Ok(seed)
    }
}

fn identity_rhs(variant: EllipticVariant, pi0: &CMat) -> CMat {
    match variant {
        EllipticVariant::SineGordon => &(pi0 * &big_j()) * &pi0.adjoint(),
        EllipticVariant::SinhGordon => pi0 * &pi0.adjoint(),
    }
}

/// Evolves the seed node, placed at the corner `(x0, t0)` of `grid`.
pub fn elliptic_evolve(seed: &EllipticSeed, bg: &ScalarBackground, grid: &GridSpec) -> Result<GbdtField> {
    let (g, f) = elliptic_coeffs(seed.variant, bg);
    evolve2d(&g, &f, &seed.node()?, grid, super::accurate_evolution())
}

/// `v̂` on a 2-D grid as real `1 × 1` samples: `v + 2 arg Z11` for
/// sine-Gordon, with the phase unwrapped along the first row and then up
/// each column, and `v + 2 ln |Z11|` for sinh-Gordon, where
/// `Z = w_A(x,t,0)`. Samples with singular `S` or `Z11 = 0` are flagged.
///
/// Extra columns: `offdiag` is `max(|Z12|, |Z21|)`; `structure` is
/// `||Z11| - 1|` plus `|Z22 - conj Z11|` (sine-Gordon) or `|Im Z11|` plus
/// `|Z11 Z22 - 1|` (sinh-Gordon).
pub fn elliptic_transform(seed: &EllipticSeed, bg: &ScalarBackground, grid: &GridSpec) -> Result<SolutionGrid> {
    let field = elliptic_evolve(seed, bg, grid)?;
    let (nx, nt) = (grid.nx, grid.nt_or_one());
    let mut zs: Vec<Option<CMat>> = Vec::with_capacity(nx * nt);
    for it in 0..nt {
        for ix in 0..nx {
            let z = (|| -> Result<CMat> {
                let node = field.node(ix, it)?;
                check_invertible(grid.x(ix), node.s())?;
                node.transfer_eval(c64(0.0, 0.0))
            })();
            match z {
                Ok(z) if z.is_finite() && z[(0, 0)].norm() > 1e-12 => zs.push(Some(z)),
                Ok(_) | Err(Error::Numerical(_)) | Err(Error::Linalg(_)) | Err(Error::NearPole(_)) => zs.push(None),
                Err(e) => return Err(e),
            }
        }
    }
    let idx = |ix: usize, it: usize| it * nx + ix;
    let mut shift = vec![f64::NAN; nx * nt];
    match seed.variant {
        EllipticVariant::SineGordon => {
            let phase: Vec<Option<f64>> = zs.iter().map(|z| z.as_ref().map(|z| z[(0, 0)].arg())).collect();
            let mut row_prev: Option<f64> = None;
            for ix in 0..nx {
                if let Some(p) = phase[idx(ix, 0)] {
                    let u = unwrap(row_prev, p);
                    shift[idx(ix, 0)] = u;
                    row_prev = Some(u);
                }
                let mut prev = phase[idx(ix, 0)].map(|_| shift[idx(ix, 0)]);
                for it in 1..nt {
                    if let Some(p) = phase[idx(ix, it)] {
                        let u = unwrap(prev.or(row_prev), p);
                        shift[idx(ix, it)] = u;
                        prev = Some(u);
                    }
                }
            }
        }
        EllipticVariant::SinhGordon => {
            for (i, z) in zs.iter().enumerate() {
                if let Some(z) = z {
                    shift[i] = z[(0, 0)].norm().ln();
                }
            }
        }
    }
    let mut values = Vec::with_capacity(nx * nt);
    let mut offdiag = Vec::with_capacity(nx * nt);
    let mut structure = Vec::with_capacity(nx * nt);
    for it in 0..nt {
        for ix in 0..nx {
            let i = idx(ix, it);
            let (x, t) = (grid.x(ix), grid.t(it));
            match &zs[i] {
                Some(z) => {
                    values.push(CMat::scalar(c64((bg.v)(x, t) + 2.0 * shift[i], 0.0)));
                    offdiag.push(z[(0, 1)].norm().max(z[(1, 0)].norm()));
                    let (z11, z22) = (z[(0, 0)], z[(1, 1)]);
                    structure.push(match seed.variant {
                        EllipticVariant::SineGordon => (z11.norm() - 1.0).abs() + (z22 - z11.conj()).norm(),
                        EllipticVariant::SinhGordon => z11.im.abs() + (z11 * z22 - 1.0).norm(),
                    });
                }
                None => {
                    values.push(CMat::zeros(1, 1));
                    offdiag.push(f64::NAN);
                    structure.push(f64::NAN);
                }
            }
        }
    }
    let name = match seed.variant {
        EllipticVariant::SineGordon => "sine-gordon",
        EllipticVariant::SinhGordon => "sinh-gordon",
    };
    let mut out = SolutionGrid::new(name, *grid, values)?;
    for (i, z) in zs.iter().enumerate() {
        if z.is_none() {
            out.flag(i);
        }
    }
    out.add_extra("offdiag", offdiag)?;
    out.add_extra("structure", structure)?;
    Ok(out)
}

/// `p` shifted by a multiple of `2π` to lie within `π` of `prev`.
fn unwrap(prev: Option<f64>, p: f64) -> f64 {
    match prev {
        None => p,
        Some(q) => p + (2.0 * std::f64::consts::PI) * ((q - p) / (2.0 * std::f64::consts::PI)).round(),
    }
}
