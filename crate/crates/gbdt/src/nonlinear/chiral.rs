//! Main chiral field `2 z_xt = z_x z^{-1} z_t + z_t z^{-1} z_x`: new
//! solutions `z̃ = w_A(x,t,0) z` from a known invertible solution `z`.

use std::sync::Arc;

use crate::dirac::check_invertible;
use crate::error::{invalid, Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::{evolve2d, CoeffFn, Coefficient, GbdtField, PolePart, RationalCoeffs};
use crate::matcore::{c64, det, inverse, CMat, GridSpec, Svd};
use crate::snode::SNode;

/// Relative smallest singular value below which `A_k` counts as singular.
pub const STATE_RCOND: f64 = 1e-10;

/// Known solution `z` with its partial derivatives.
#[derive(Clone)]
pub struct ChiralBackground {
    pub z: CoeffFn,
    pub zx: CoeffFn,
    pub zt: CoeffFn,
}

impl std::fmt::Debug for ChiralBackground {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ChiralBackground(..)")
    }
}

impl ChiralBackground {
    pub fn new(
        z: impl Fn(f64, f64) -> CMat + Send + Sync + 'static,
        zx: impl Fn(f64, f64) -> CMat + Send + Sync + 'static,
        zt: impl Fn(f64, f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        Self { z: Arc::new(z), zx: Arc::new(zx), zt: Arc::new(zt) }
    }

    /// Constant invertible `z`.
    pub fn constant(z: CMat) -> Self {
        let m = z.nrows();
        Self::new(move |_, _| z.clone(), move |_, _| CMat::zeros(m, m), move |_, _| CMat::zeros(m, m))
    }

    /// `z = diag(exp(α_k x + β_k t))`.
    pub fn diagonal_exponential(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return invalid("alpha and beta must have equal length");
        }
        let diag = |al: Vec<f64>, be: Vec<f64>, wx: bool, wt: bool| {
            move |x: f64, t: f64| {
                let d: Vec<f64> = al
                    .iter()
                    .zip(&be)
                    .map(|(a, b)| {
                        let e = (a * x + b * t).exp();
                        e * if wx { *a } else { 1.0 } * if wt { *b } else { 1.0 }
                    })
                    .collect();
                CMat::from_real_diag(&d)
            }
        };
        Ok(Self::new(
            diag(alpha.clone(), beta.clone(), false, false),
            diag(alpha.clone(), beta.clone(), true, false),
            diag(alpha, beta, false, true),
        ))
    }

    pub fn m(&self) -> usize {
        (self.z)(0.0, 0.0).nrows()
    }

    /// `G = -(λ - 1)^{-1} z_x z^{-1}` and `F = (λ + 1)^{-1} z_t z^{-1}`.
    pub fn coeffs(&self) -> (RationalCoeffs, RationalCoeffs) {
        let m = self.m();
        let ratio = |d: CoeffFn, z: CoeffFn, sign: f64| {
            Coefficient::function(move |x, t| match inverse(&z(x, t)) {
                Ok(zi) => (&d(x, t) * &zi).scale_re(sign),
                Err(_) => CMat::from_fn(m, m, |_, _| c64(f64::NAN, 0.0)),
            })
        };
        let g = RationalCoeffs::new(
            m,
            vec![],
            vec![PolePart { c: c64(1.0, 0.0), parts: vec![ratio(self.zx.clone(), self.z.clone(), 1.0)] }],
        )
        .expect("single pole");
        let f = RationalCoeffs::new(
            m,
            vec![],
            vec![PolePart { c: c64(-1.0, 0.0), parts: vec![ratio(self.zt.clone(), self.z.clone(), -1.0)] }],
        )
        .expect("single pole");
        (g, f)
    }
}

fn check_state(a: &CMat, name: &str) -> Result<()> {
    if a.nrows() == 0 {
        return Ok(());
    }
    let sv = Svd::new(a)?;
    if sv.s[a.nrows() - 1] <= STATE_RCOND * sv.s[0].max(1.0) {
        return Err(Error::InvalidInput(format!("{name} must be invertible")));
    }
    Ok(())
}

/// Evolves `node`, given at the corner `(x0, t0)` of `grid`, through the
/// chiral auxiliary systems.
pub fn chiral_evolve(node: &SNode, bg: &ChiralBackground, grid: &GridSpec) -> Result<GbdtField> {
    check_state(node.a1(), "A1")?;
    check_state(node.a2(), "A2")?;
    let (g, f) = bg.coeffs();
    evolve2d(&g, &f, node, grid, super::accurate_evolution())
}

/// `z̃ = w_A(x,t,0) z(x,t)` on a 2-D grid. Samples with singular `S` or
/// singular `z̃` are flagged. The extra column `det_w` holds
/// `|det w_A(x,t,0)|`.
pub fn chiral_transform(node: &SNode, bg: &ChiralBackground, grid: &GridSpec) -> Result<SolutionGrid> {
    let field = chiral_evolve(node, bg, grid)?;
    let (nx, nt) = (grid.nx, grid.nt_or_one());
    let m = node.m();
    let mut values = Vec::with_capacity(nx * nt);
    let mut bad = Vec::with_capacity(nx * nt);
    let mut det_w = Vec::with_capacity(nx * nt);
    for it in 0..nt {
        for ix in 0..nx {
            let (x, t) = (grid.x(ix), grid.t(it));
            let sample = (|| -> Result<(CMat, f64)> {
                let n = field.node(ix, it)?;
                check_invertible(x, n.s())?;
                let w = n.transfer_eval(c64(0.0, 0.0))?;
                let zt = &w * &(bg.z)(x, t);
                check_invertible(x, &zt)?;
                Ok((zt, det(&w)?.norm()))
            })();
            match sample {
                Ok((z, d)) if z.is_finite() => {
                    values.push(z);
                    bad.push(false);
                    det_w.push(d);
                }
                Ok(_) | Err(Error::Numerical(_)) | Err(Error::Linalg(_)) | Err(Error::NearPole(_)) => {
                    values.push(CMat::zeros(m, m));
                    bad.push(true);
                    det_w.push(f64::NAN);
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut out = SolutionGrid::new("chiral", *grid, values)?;
    for (i, b) in bad.into_iter().enumerate() {
        if b {
            out.flag(i);
        }
    }
    out.add_extra("det_w", det_w)?;
    Ok(out)
}
