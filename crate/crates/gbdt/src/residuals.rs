//! Finite-difference residual oracles for ODEs, zero-curvature pairs and
//! the nonlinear equations, with convergence-order estimation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::SolutionGrid;
use crate::matcore::{inverse, CMat, GridSpec};

/// Largest residual over interior grid points and where it occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    pub ix: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub it: Option<usize>,
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl ResidualReport {
    fn empty(grid: &GridSpec) -> Self {
        Self { max_residual: 0.0, h: grid.hx(), order: None, ix: 0, it: None, x: grid.x0, t: None }
    }

    fn update(&mut self, r: f64, grid: &GridSpec, ix: usize, it: Option<usize>) {
        // A NaN residual always takes the max slot.
        if r > self.max_residual || (r.is_nan() && !self.max_residual.is_nan()) {
            self.max_residual = r;
            self.ix = ix;
            self.it = it;
            self.x = grid.x(ix);
            self.t = it.map(|k| grid.t(k));
        }
    }

    /// This report (on the finer grid) with the order estimated against
    /// `coarse`.
    pub fn with_order_from(mut self, coarse: &ResidualReport) -> Self {
        self.order = Some(estimate_order(coarse.max_residual, self.max_residual));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// `log2(r_h / r_{h/2})`.
pub fn estimate_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn need_points(n: usize, what: &str) -> Result<()> {
    if n < 5 {
        return invalid(format!("grid too coarse in {what}: need at least 5 points, got {n}"));
    }
    Ok(())
}

/// Max over interior points of `‖(u[i+1] - u[i-1]) / 2h - rhs[i]‖` on a
/// 1-D grid.
pub fn derivative_residual(grid: &GridSpec, u: &[CMat], rhs: &[CMat]) -> Result<ResidualReport> {
    need_points(grid.nx, "x")?;
    if u.len() != grid.nx || rhs.len() != grid.nx {
        return invalid("sample count does not match the grid");
    }
    let h = grid.hx();
    let mut rep = ResidualReport::empty(grid);
    for i in 1..grid.nx - 1 {
        let d = (&u[i + 1] - &u[i - 1]).scale_re(0.5 / h);
        rep.update(d.dist(&rhs[i]), grid, i, None);
    }
    Ok(rep)
}

/// Residual of `u_x = G u` for samplers `u`, `G` on `grid`; the order is
/// estimated from a second pass at half the step.
pub fn ode_residual<U, G>(u: U, g: G, grid: &GridSpec) -> Result<ResidualReport>
where
    U: Fn(f64) -> Result<CMat>,
    G: Fn(f64) -> Result<CMat>,
{
    let pass = |grid: &GridSpec| -> Result<ResidualReport> {
        let xs = grid.xs();
        let us: Vec<CMat> = xs.iter().map(|&x| u(x)).collect::<Result<_>>()?;
        let rhs: Vec<CMat> = xs.iter().zip(&us).map(|(&x, ux)| Ok(&g(x)? * ux)).collect::<Result<_>>()?;
        derivative_residual(grid, &us, &rhs)
    };
    let coarse = pass(grid)?;
    Ok(pass(&grid.refined())?.with_order_from(&coarse))
}

/// Residual of `G_t - F_x + [G, F] = 0` for fields sampled on a 2-D grid
/// (index `it * nx + ix`).
pub fn zero_curvature_sampled(grid: &GridSpec, g: &[CMat], f: &[CMat]) -> Result<ResidualReport> {
    let nt = grid.nt.ok_or_else(|| crate::Error::InvalidInput("zero curvature needs a 2-D grid".into()))?;
    need_points(grid.nx, "x")?;
    need_points(nt, "t")?;
    let nx = grid.nx;
    if g.len() != nx * nt || f.len() != nx * nt {
        return invalid("sample count does not match the grid");
    }
    let (hx, ht) = (grid.hx(), grid.ht().expect("2-D grid"));
    let mut rep = ResidualReport::empty(grid);
    for it in 1..nt - 1 {
        for ix in 1..nx - 1 {
            let k = it * nx + ix;
            let gt = (&g[k + nx] - &g[k - nx]).scale_re(0.5 / ht);
            let fx = (&f[k + 1] - &f[k - 1]).scale_re(0.5 / hx);
            let r = &(&gt - &fx) + &g[k].commutator(&f[k]);
            rep.update(r.norm_fro(), grid, ix, Some(it));
        }
    }
    Ok(rep)
}

/// Zero-curvature residual for samplers `G(x, t)`, `F(x, t)`, with the
/// order estimated from a second pass at half the steps.
pub fn zero_curvature_residual<G, F>(g: G, f: F, grid: &GridSpec) -> Result<ResidualReport>
where
    G: Fn(f64, f64) -> Result<CMat>,
    F: Fn(f64, f64) -> Result<CMat>,
{
    let pass = |grid: &GridSpec| -> Result<ResidualReport> {
        let mut gs = Vec::new();
        let mut fs = Vec::new();
        for t in grid.ts() {
            for x in grid.xs() {
                gs.push(g(x, t)?);
                fs.push(f(x, t)?);
            }
        }
        zero_curvature_sampled(grid, &gs, &fs)
    };
    let coarse = pass(grid)?;
    Ok(pass(&grid.refined())?.with_order_from(&coarse))
}

/// Nonlinear equations checked by [`pde_residual`].
#[derive(Clone, Debug, PartialEq)]
pub enum PdeKind {
    /// `[D, ξ_t] - [D̂, ξ_x] = [[D, ξ], [D̂, ξ]]`.
    NWave { d: CMat, d_hat: CMat },
    /// `2 v_t + i (v_xx + 2 v v^* v) = 0`.
    Fnls,
    /// `2 z_xt = z_x z^{-1} z_t + z_t z^{-1} z_x`.
    Chiral,
    /// `v_tt + v_xx = sin v` for the real part of the `(0, 0)` entry.
    SineGordon,
    /// `v_tt + v_xx = sinh v` for the real part of the `(0, 0)` entry.
    SinhGordon,
}

/// Residual of the selected equation using central differences; samples
/// whose stencil touches a flagged point are skipped.
pub fn pde_residual(kind: &PdeKind, field: &SolutionGrid) -> Result<ResidualReport> {
    let grid = field.grid;
    let nt = grid.nt.ok_or_else(|| crate::Error::InvalidInput("PDE residual needs a 2-D grid".into()))?;
    need_points(grid.nx, "x")?;
    need_points(nt, "t")?;
    let nx = grid.nx;
    let (hx, ht) = (grid.hx(), grid.ht().expect("2-D grid"));
    let v = field.values();
    let dx = |k: usize| (&v[k + 1] - &v[k - 1]).scale_re(0.5 / hx);
    let dt = |k: usize| (&v[k + nx] - &v[k - nx]).scale_re(0.5 / ht);
    let dxx = |k: usize| (&(&v[k + 1] + &v[k - 1]) - &v[k].scale_re(2.0)).scale_re(1.0 / (hx * hx));
    let dtt = |k: usize| (&(&v[k + nx] + &v[k - nx]) - &v[k].scale_re(2.0)).scale_re(1.0 / (ht * ht));
    let mut rep = ResidualReport::empty(&grid);
    rep.h = hx.max(ht);
    for it in 1..nt - 1 {
        for ix in 1..nx - 1 {
            let k = it * nx + ix;
            let stencil = [k, k - 1, k + 1, k - nx, k + nx, k - nx - 1, k - nx + 1, k + nx - 1, k + nx + 1];
            if stencil.iter().any(|&s| field.is_flagged(s)) {
                continue;
            }
            let r = match kind {
                PdeKind::NWave { d, d_hat } => {
                    let xi = &v[k];
                    let lhs = &d.commutator(&dt(k)) - &d_hat.commutator(&dx(k));
                    let rhs = d.commutator(xi).commutator(&d_hat.commutator(xi));
                    (&lhs - &rhs).norm_fro()
                }
                PdeKind::Fnls => {
                    let vk = &v[k];
                    let cubic = &(vk * &vk.adjoint()) * vk;
                    let inner = &dxx(k) + &cubic.scale_re(2.0);
                    (&dt(k).scale_re(2.0) + &inner.scale(crate::matcore::I)).norm_fro()
                }
                PdeKind::Chiral => {
                    let zxt = (&(&v[k + nx + 1] - &v[k + nx - 1]) - &(&v[k - nx + 1] - &v[k - nx - 1]))
                        .scale_re(0.25 / (hx * ht));
                    let zinv = inverse(&v[k])?;
                    let (zx, zt) = (dx(k), dt(k));
                    let rhs = &(&(&zx * &zinv) * &zt) + &(&(&zt * &zinv) * &zx);
                    (&zxt.scale_re(2.0) - &rhs).norm_fro()
                }
                PdeKind::SineGordon | PdeKind::SinhGordon => {
                    let lap = (dtt(k)[(0, 0)] + dxx(k)[(0, 0)]).re;
                    let u = v[k][(0, 0)].re;
                    let src = if *kind == PdeKind::SineGordon { u.sin() } else { u.sinh() };
                    (lap - src).abs()
                }
            };
            rep.update(r, &grid, ix, Some(it));
        }
    }
    Ok(rep)
}

/// [`pde_residual`] on a field and its refinement, with the order attached
/// to the fine report.
pub fn pde_residual_order(kind: &PdeKind, coarse: &SolutionGrid, fine: &SolutionGrid) -> Result<ResidualReport> {
    let c = pde_residual(kind, coarse)?;
    Ok(pde_residual(kind, fine)?.with_order_from(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c64, expm};

    #[test]
    fn quadratic_is_exact() {
        // u = 1 + x + x^2/2 solves u' = g u with g = (1 + x) / u.
        let u = |x: f64| Ok(CMat::scalar(c64(1.0 + x + x * x / 2.0, 0.0)));
        let g = |x: f64| Ok(CMat::scalar(c64((1.0 + x) / (1.0 + x + x * x / 2.0), 0.0)));
        let rep = ode_residual(u, g, &GridSpec::new(0.0, 1.0, 11).unwrap()).unwrap();
        assert!(rep.max_residual < 1e-12);
    }

    #[test]
    fn expm_second_order() {
        let gm = CMat::from_real(&[&[0.0, 1.0], &[-4.0, 0.0]]);
        let u = |x: f64| Ok(expm(&gm, x)?);
        let g = |_x: f64| Ok(gm.clone());
        let rep = ode_residual(u, g, &GridSpec::new(0.0, 1.0, 101).unwrap()).unwrap();
        let order = rep.order.unwrap();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn commuting_constants_flat() {
        let grid = GridSpec::new_2d(0.0, 1.0, 6, 0.0, 1.0, 6).unwrap();
        let g = |_x: f64, _t: f64| Ok(CMat::from_real_diag(&[1.0, 2.0]));
        let f = |_x: f64, _t: f64| Ok(CMat::from_real_diag(&[3.0, -1.0]));
        assert_eq!(zero_curvature_residual(g, f, &grid).unwrap().max_residual, 0.0);
    }

    #[test]
    fn plane_wave_and_zero_field() {
        let grid = GridSpec::new_2d(0.0, 1.0, 21, 0.0, 1.0, 21).unwrap();
        let vals: Vec<CMat> =
            grid.ts().iter().flat_map(|&t| grid.xs().into_iter().map(move |_| CMat::scalar(c64(0.0, -t).exp()))).collect();
        let field = SolutionGrid::new("fnls", grid, vals).unwrap();
        // Central differences of e^{-it} carry an O(h^2) factor.
        let rep = pde_residual(&PdeKind::Fnls, &field).unwrap();
        assert!(rep.max_residual < 2.0 * (1.0 / 20.0f64).powi(2));
        let zero = SolutionGrid::zeros("sg", grid, 1, 1);
        assert_eq!(pde_residual(&PdeKind::SineGordon, &zero).unwrap().max_residual, 0.0);
        assert_eq!(pde_residual(&PdeKind::SinhGordon, &zero).unwrap().max_residual, 0.0);
    }

    #[test]
    fn corrupted_sample_detected() {
        let grid = GridSpec::new_2d(0.0, 1.0, 11, 0.0, 1.0, 11).unwrap();
        let mut field = SolutionGrid::zeros("sg", grid, 1, 1);
        let k = field.index(4, 6);
        field.values_mut()[k] = CMat::scalar(c64(1.0, 0.0));
        let rep = pde_residual(&PdeKind::SineGordon, &field).unwrap();
        assert!(rep.max_residual > 100.0);
        assert_eq!((rep.ix, rep.it), (4, Some(6)));
    }
}
