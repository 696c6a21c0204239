//! Dense complex linear algebra: matrices, grids, exponentials, linear,
//! Sylvester and Riccati solvers, and a matrix ODE integrator.

mod cmat;
pub mod decomp;
mod expm;
mod grid;
mod lu;
mod ode;
mod riccati;
mod sylvester;

pub use cmat::{c64, CMat, C64, I};
pub use decomp::{eigenvalues, eigh, hermitian_defect, hermitian_function, qr_pivoted, Schur, Svd};
pub use expm::{expm, expm_gramian};
pub use grid::{GridSpec, DEFAULT_POINTS_PER_UNIT};
pub use lu::{det, inverse, solve_linear, solve_linear_capped, Lu, COND_CAP};
pub use ode::{integrate_matrix_ode, rk4_step, OdeOptions};
pub use riccati::{riccati_residual, solve_inverse_riccati, RiccatiForm};
pub use sylvester::{solve_sylvester, spectral_gap, SEPARATION_TOL};

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// A rank drop is accepted only across a singular-value gap at least this wide.
pub const RANK_GAP: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("expected a square matrix, got {}x{}", .0.0, .0.1)]
    NotSquare((usize, usize)),
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("matrix is singular or too ill-conditioned (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("spectra overlap (separation {gap:.3e})")]
    SpectralOverlap { gap: f64 },
    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("no admissible solution: {0}")]
    NoAdmissibleSolution(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Numerical rank of descending singular values `s` measured against
/// `reference`, keeping borderline values unless a clear gap separates them.
pub fn numerical_rank(s: &[f64], reference: f64) -> usize {
    if reference <= 0.0 {
        return 0;
    }
    let mut r = s.iter().take_while(|&&v| v > RANK_TOL * reference).count();
    while r > 0 && r < s.len() && s[r] > 0.0 && s[r - 1] / s[r] < RANK_GAP {
        r += 1;
    }
    r
}

/// Orthonormal basis of the smallest `A`-invariant subspace containing the
/// range of `B`, built block by block (staircase form).
pub fn controllable_basis(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.shape()));
    }
    if b.nrows() != n {
        return Err(LinalgError::DimensionMismatch(format!("A {:?} vs B {:?}", a.shape(), b.shape())));
    }
    let mut q = CMat::zeros(n, 0);
    let mut w = b.clone();
    let mut reference = b.norm_fro();
    let a_norm = a.norm_fro();
    while q.ncols() < n && w.ncols() > 0 {
        for _ in 0..2 {
            let proj = &q * &(&q.adjoint() * &w);
            w = &w - &proj;
        }
        let svd = Svd::new(&w)?;
        let r = numerical_rank(&svd.s, reference).min(n - q.ncols());
        if r == 0 {
            break;
        }
        let fresh = svd.u.columns(0, r);
        q = CMat::hstack(&[&q, &fresh]);
        w = a * &fresh;
        reference = a_norm;
    }
    Ok(q)
}

/// Dimension of the controllable subspace of the pair `(A, B)`.
pub fn krylov_rank(a: &CMat, b: &CMat) -> Result<usize, LinalgError> {
    Ok(controllable_basis(a, b)?.ncols())
}

/// Positive definiteness test for a Hermitian matrix.
///
/// Fails with [`LinalgError::NotHermitian`] when the relative Hermitian
/// defect exceeds `1e-10`.
pub fn is_posdef(s: &CMat) -> Result<bool, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare(s.shape()));
    }
    if s.nrows() == 0 {
        return Ok(true);
    }
    let (vals, _) = eigh(s)?;
    let norm = s.norm_fro();
    Ok(norm > 0.0 && vals[0] > -1e-12 * norm)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(s: &CMat) -> Result<f64, LinalgError> {
    let (vals, _) = eigh(s)?;
    Ok(vals.first().copied().unwrap_or(f64::INFINITY))
}

/// Principal square root of a positive definite matrix.
pub fn sqrtm_posdef(s: &CMat) -> Result<CMat, LinalgError> {
    hermitian_function(s, f64::sqrt)
}

/// Inverse principal square root of a positive definite matrix.
pub fn inv_sqrtm_posdef(s: &CMat) -> Result<CMat, LinalgError> {
    hermitian_function(s, |v| 1.0 / v.sqrt())
}

/// `diag(I_p1, -I_p2)`.
pub fn signature(p1: usize, p2: usize) -> CMat {
    let d: Vec<f64> = (0..p1).map(|_| 1.0).chain((0..p2).map(|_| -1.0)).collect();
    CMat::from_real_diag(&d)
}

/// Block swap `[[0, I_p], [I_p, 0]]`.
pub fn block_swap(p: usize) -> CMat {
    let mut m = CMat::zeros(2 * p, 2 * p);
    for i in 0..p {
        m[(i, p + i)] = c64(1.0, 0.0);
        m[(p + i, i)] = c64(1.0, 0.0);
    }
    m
}

pub fn sigma1() -> CMat {
    CMat::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn sigma2() -> CMat {
    CMat::from_rows(&[vec![c64(0.0, 0.0), c64(0.0, -1.0)], vec![c64(0.0, 1.0), c64(0.0, 0.0)]]).expect("finite")
}

pub fn sigma3() -> CMat {
    signature(1, 1)
}

/// The symplectic unit `[[0, 1], [-1, 0]]`.
pub fn j_breve() -> CMat {
    CMat::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]])
}

/// The unitary `(1/sqrt 2) [[1, 1], [-i, i]]` diagonalizing `j_breve`.
pub fn k_breve() -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_rows(&[vec![c64(r, 0.0), c64(r, 0.0)], vec![c64(0.0, -r), c64(0.0, r)]]).expect("finite")
}
