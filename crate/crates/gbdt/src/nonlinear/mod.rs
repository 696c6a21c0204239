//! Explicit solutions of integrable nonlinear equations built by GBDT from
//! simple initial solutions.

pub mod chiral;
pub mod elliptic;
pub mod nls;
pub mod nwave;

use rayon::prelude::*;

use crate::dirac::check_invertible;
use crate::error::{Error, Result};
use crate::field::SolutionGrid;
use crate::gbdt_core::EvolveOptions;
use crate::matcore::{solve_linear, CMat, GridSpec, OdeOptions};

pub use chiral::*;
pub use elliptic::*;
pub use nls::*;
pub use nwave::*;

/// Relative spectral gap below which `S` is obtained by integration rather
/// than from the identity.
pub const SYLVESTER_GAP: f64 = 1e-6;

/// Step control for the evolutions behind the transforms: each grid
/// interval is refined until successive RK4 results agree to `1e-12`.
pub fn accurate_evolution() -> EvolveOptions {
    EvolveOptions { ode: OdeOptions { substeps: 2, halving_tol: Some(1e-12) } }
}

/// `defect` relative to the sum of the sizes of the terms it combines.
pub(crate) fn relative(defect: f64, parts: &[f64]) -> f64 {
    defect / parts.iter().sum::<f64>().max(1.0)
}

/// `S^{-1} rhs`, failing with a numerical error when `S` is singular.
pub(crate) fn solve_s(x: f64, s: &CMat, rhs: &CMat) -> Result<CMat> {
    check_invertible(x, s)?;
    Ok(solve_linear(s, rhs)?)
}

/// Samples `f` over every point of `grid`, `t` outermost. Points where `S`
/// is singular or the value is not finite are flagged and stored as zeros.
pub(crate) fn sample_grid(
    name: &str,
    grid: &GridSpec,
    shape: (usize, usize),
    f: impl Fn(f64, f64) -> Result<CMat> + Sync,
) -> Result<SolutionGrid> {
    grid.validate()?;
    let xs = grid.xs();
    let ts = if grid.has_t() { grid.ts() } else { vec![0.0] };
    let pts: Vec<(f64, f64)> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (x, t))).collect();
    let vals: Vec<Option<CMat>> = pts
        .par_iter()
        .map(|&(x, t)| match f(x, t) {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) | Err(Error::Linalg(_)) | Err(Error::Numerical(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let flags: Vec<bool> = vals.iter().map(Option::is_none).collect();
    let values = vals.into_iter().map(|v| v.unwrap_or_else(|| CMat::zeros(shape.0, shape.1))).collect();
    let mut out = SolutionGrid::new(name, *grid, values)?;
    for (i, bad) in flags.into_iter().enumerate() {
        if bad {
            out.flag(i);
        }
    }
    Ok(out)
}
