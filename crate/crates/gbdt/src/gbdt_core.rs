//! The general GBDT engine for first-order systems `u_x = G u` whose
//! coefficient `G(x, λ)` is rational in `λ`: evolution of `Π1`, `Π2^*`, `S`,
//! the transformed coefficients and Darboux-matrix residuals.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matcore::{eigenvalues, integrate_matrix_ode, inverse, solve_linear, CMat, GridSpec, OdeOptions, C64};
use crate::residuals::{derivative_residual, zero_curvature_sampled, ResidualReport};
use crate::snode::SNode;

/// Relative node-identity tolerance required of the initial data.
pub const INITIAL_IDENTITY_TOL: f64 = 1e-10;
/// Relative node-identity tolerance maintained along evolved trajectories.
pub const PROPAGATION_TOL: f64 = 1e-7;
/// Minimal distance between a pole and the spectra of `A1`, `A2`.
pub const POLE_SEPARATION: f64 = 1e-10;

pub type CoeffFn = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

/// An `m × m` coefficient depending on `(x, t)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(CMat),
    Function(CoeffFn),
    /// Samples on an increasing `x` grid, interpolated linearly and held
    /// constant outside; independent of `t`.
    Sampled { xs: Vec<f64>, values: Vec<CMat> },
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Coefficient::Function(_) => f.write_str("Function(..)"),
            Coefficient::Sampled { xs, .. } => write!(f, "Sampled({} points)", xs.len()),
        }
    }
}

impl Coefficient {
    pub fn function(f: impl Fn(f64, f64) -> CMat + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn sampled(xs: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return invalid("sampled coefficient needs one value per abscissa");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sample abscissae must increase");
        }
        Ok(Coefficient::Sampled { xs, values })
    }

    pub fn eval(&self, x: f64, t: f64) -> CMat {
        match self {
            Coefficient::Constant(m) => m.clone(),
            Coefficient::Function(f) => f(x, t),
            Coefficient::Sampled { xs, values } => {
                let n = xs.len();
                if x <= xs[0] {
                    return values[0].clone();
                }
                if x >= xs[n - 1] {
                    return values[n - 1].clone();
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                &values[k].scale_re(1.0 - w) + &values[k + 1].scale_re(w)
            }
        }
    }
}

/// Principal part of the coefficient at one pole `c`; `parts[k - 1]`
/// multiplies `(λ - c)^{-k}`.
#[derive(Clone, Debug)]
pub struct PolePart {
    pub c: C64,
    pub parts: Vec<Coefficient>,
}

/// `G(x, λ) = -(Σ_k λ^k q_k(x) + Σ_s Σ_k (λ - c_s)^{-k} q_{sk}(x))`.
#[derive(Clone, Debug)]
pub struct RationalCoeffs {
    m: usize,
    poly: Vec<Coefficient>,
    poles: Vec<PolePart>,
}

impl RationalCoeffs {
    pub fn new(m: usize, poly: Vec<Coefficient>, poles: Vec<PolePart>) -> Result<Self> {
        for (i, a) in poles.iter().enumerate() {
            if !(a.c.re.is_finite() && a.c.im.is_finite()) {
                return invalid("pole is not finite");
            }
            if poles[..i].iter().any(|b| b.c == a.c) {
                return invalid(format!("pole {} repeated", a.c));
            }
        }
        Ok(Self { m, poly, poles })
    }

    /// `G ≡ 0`.
    pub fn zero(m: usize) -> Self {
        Self { m, poly: Vec::new(), poles: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Degree `r` of the polynomial part (0 when absent).
    pub fn degree(&self) -> usize {
        self.poly.len().saturating_sub(1)
    }

    pub fn poles(&self) -> Vec<(C64, usize)> {
        self.poles.iter().map(|p| (p.c, p.parts.len())).collect()
    }

    /// Evaluates every coefficient at `(x, t)`.
    pub fn sample(&self, x: f64, t: f64) -> Result<CoeffSample> {
        let check = |q: CMat| -> Result<CMat> {
            if q.shape() != (self.m, self.m) {
                return invalid(format!("coefficient has shape {:?}, expected {}x{}", q.shape(), self.m, self.m));
            }
            if !q.is_finite() {
                return Err(Error::Numerical(format!("coefficient not finite at x={x}, t={t}")));
            }
            Ok(q)
        };
        let poly = self.poly.iter().map(|q| check(q.eval(x, t))).collect::<Result<_>>()?;
        let poles = self
            .poles
            .iter()
            .map(|p| Ok((p.c, p.parts.iter().map(|q| check(q.eval(x, t))).collect::<Result<_>>()?)))
            .collect::<Result<_>>()?;
        Ok(CoeffSample { m: self.m, poly, poles })
    }
}

/// Coefficient values at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSample {
    pub m: usize,
    pub poly: Vec<CMat>,
    pub poles: Vec<(C64, Vec<CMat>)>,
}

impl CoeffSample {
    /// `G(λ)` assembled from the sample.
    pub fn g(&self, lambda: C64) -> CMat {
        let mut acc = CMat::zeros(self.m, self.m);
        let mut pw = C64::new(1.0, 0.0);
        for q in &self.poly {
            acc += q.scale(pw);
            pw *= lambda;
        }
        for (c, parts) in &self.poles {
            let base = (lambda - c).inv();
            let mut pw = base;
            for q in parts {
                acc += q.scale(pw);
                pw *= base;
            }
        }
        -acc
    }

    fn shape_key(&self) -> (usize, Vec<(C64, usize)>) {
        (self.poly.len(), self.poles.iter().map(|(c, p)| (*c, p.len())).collect())
    }
}

/// Powers `A^k` and inverse shifted powers `(A - c_s)^{-k}` of both state
/// matrices, computed once per evolution.
#[derive(Clone, Debug)]
struct Powers {
    a1: Vec<CMat>,
    a2: Vec<CMat>,
    a1_inv: Vec<Vec<CMat>>,
    a2_inv: Vec<Vec<CMat>>,
}

impl Powers {
    fn new(a1: &CMat, a2: &CMat, r: usize, poles: &[(C64, usize)]) -> Result<Self> {
        let pows = |a: &CMat| {
            let mut v = vec![CMat::identity(a.nrows())];
            for k in 1..=r {
                v.push(&v[k - 1] * a);
            }
            v
        };
        let inv_pows = |a: &CMat, c: C64, rs: usize| -> Result<Vec<CMat>> {
            let base = inverse(&a.shift(c))
                .map_err(|_| Error::NotAdmissible(format!("pole {c} lies in the spectrum of a state matrix")))?;
            let mut v = vec![CMat::identity(a.nrows())];
            for k in 1..=rs {
                v.push(&v[k - 1] * &base);
            }
            Ok(v)
        };
        let n = a1.nrows();
        if n > 0 && !poles.is_empty() {
            let spec: Vec<C64> = eigenvalues(a1)?.into_iter().chain(eigenvalues(a2)?).collect();
            let scale = a1.norm_fro().max(a2.norm_fro()).max(1.0);
            for (c, _) in poles {
                if spec.iter().any(|z| (z - c).norm() <= POLE_SEPARATION * scale) {
                    return Err(Error::NotAdmissible(format!("pole {c} lies in the spectrum of a state matrix")));
                }
            }
        }
        Ok(Self {
            a1: pows(a1),
            a2: pows(a2),
            a1_inv: poles.iter().map(|&(c, rs)| inv_pows(a1, c, rs)).collect::<Result<_>>()?,
            a2_inv: poles.iter().map(|&(c, rs)| inv_pows(a2, c, rs)).collect::<Result<_>>()?,
        })
    }

    fn for_coeffs(a1: &CMat, a2: &CMat, coeffs: &RationalCoeffs) -> Result<Self> {
        Self::new(a1, a2, coeffs.degree(), &coeffs.poles())
    }
}

/// Right-hand sides of the `Π1`, `Π2^*`, `S` equations at one point.
fn derivatives(p: &Powers, q: &CoeffSample, pi1: &CMat, pi2a: &CMat) -> [CMat; 3] {
    let (n, m) = pi1.shape();
    let mut d1 = CMat::zeros(n, m);
    let mut d2 = CMat::zeros(m, n);
    let mut ds = CMat::zeros(n, n);
    for (k, qk) in q.poly.iter().enumerate() {
        let pq = pi1 * qk;
        d1 += &p.a1[k] * &pq;
        d2 -= &(qk * pi2a) * &p.a2[k];
        if k >= 1 {
            let core = &pq * pi2a;
            for j in 1..=k {
                ds += &(&p.a1[k - j] * &core) * &p.a2[j - 1];
            }
        }
    }
    for (s, (_, parts)) in q.poles.iter().enumerate() {
        let (i1, i2) = (&p.a1_inv[s], &p.a2_inv[s]);
        for (idx, qk) in parts.iter().enumerate() {
            let k = idx + 1;
            let pq = pi1 * qk;
            d1 += &i1[k] * &pq;
            d2 -= &(qk * pi2a) * &i2[k];
            let core = &pq * pi2a;
            for j in 1..=k {
                ds -= &(&i1[k + 1 - j] * &core) * &i2[j];
            }
        }
    }
    [d1, d2, ds]
}

/// Direction of a one-variable sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sweep {
    /// Along `x` with `t` held fixed.
    X { t: f64 },
    /// Along `t` with `x` held fixed.
    T { x: f64 },
}

/// Evolved node data along a sweep: `A1`, `A2` fixed, and `Π1`, `Π2^*`,
/// `S` at every sample point.
#[derive(Clone, Debug)]
pub struct GbdtState {
    a1: CMat,
    a2: CMat,
    sweep: Sweep,
    points: Vec<f64>,
    pi1: Vec<CMat>,
    pi2_adj: Vec<CMat>,
    s: Vec<CMat>,
}

impl GbdtState {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn sweep(&self) -> Sweep {
        self.sweep
    }

    /// `(x, t)` of sample `i`.
    pub fn coords(&self, i: usize) -> (f64, f64) {
        match self.sweep {
            Sweep::X { t } => (self.points[i], t),
            Sweep::T { x } => (x, self.points[i]),
        }
    }

    pub fn a1(&self) -> &CMat {
        &self.a1
    }

    pub fn a2(&self) -> &CMat {
        &self.a2
    }

    pub fn pi1(&self, i: usize) -> &CMat {
        &self.pi1[i]
    }

    pub fn pi2_adj(&self, i: usize) -> &CMat {
        &self.pi2_adj[i]
    }

    pub fn s(&self, i: usize) -> &CMat {
        &self.s[i]
    }

    /// Node at sample `i`; the identity holds to integration accuracy only.
    pub fn node(&self, i: usize) -> Result<SNode> {
        SNode::new_unchecked(
            self.a1.clone(),
            self.a2.clone(),
            self.s[i].clone(),
            self.pi1[i].clone(),
            self.pi2_adj[i].adjoint(),
        )
    }

    /// Largest relative identity defect over all samples.
    pub fn identity_residual_max(&self) -> f64 {
        (0..self.len()).map(|i| relative_identity_residual(&self.a1, &self.a2, &self.s[i], &self.pi1[i], &self.pi2_adj[i])).fold(0.0, f64::max)
    }

    /// `w_A(λ) = I - Π2^* S^{-1} (A1 - λ)^{-1} Π1` at sample `i`.
    pub fn transfer_eval(&self, i: usize, lambda: C64) -> Result<CMat> {
        transfer(&self.a1, &self.s[i], &self.pi1[i], &self.pi2_adj[i], lambda)
    }

    /// Transformed coefficients at sample `i`.
    pub fn transformed_coeffs(&self, coeffs: &RationalCoeffs, i: usize) -> Result<CoeffSample> {
        let p = Powers::for_coeffs(&self.a1, &self.a2, coeffs)?;
        let (x, t) = self.coords(i);
        transform_with(&p, &self.s[i], &self.pi1[i], &self.pi2_adj[i], &coeffs.sample(x, t)?)
    }

    /// Transformed coefficients at the sample nearest to `x` along the sweep.
    pub fn transformed_coeffs_at(&self, coeffs: &RationalCoeffs, x: f64) -> Result<CoeffSample> {
        let i = self
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidInput("empty state".into()))?;
        self.transformed_coeffs(coeffs, i)
    }

    /// Transformed coefficients at every sample.
    pub fn transformed_all(&self, coeffs: &RationalCoeffs) -> Result<Vec<CoeffSample>> {
        let p = Powers::for_coeffs(&self.a1, &self.a2, coeffs)?;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (x, t) = self.coords(i);
                transform_with(&p, &self.s[i], &self.pi1[i], &self.pi2_adj[i], &coeffs.sample(x, t)?)
            })
            .collect()
    }

    fn uniform_grid(&self) -> Result<GridSpec> {
        let n = self.points.len();
        if n < 2 {
            return invalid("state has fewer than two samples");
        }
        let (a, b) = (self.points[0], self.points[n - 1]);
        if a < b {
            Ok(GridSpec::new(a, b, n)?)
        } else {
            invalid("residuals need an increasing sweep")
        }
    }

    /// Residual of `w_x = G̃ w - w G` with `w_x` from central differences.
    pub fn darboux_residual(&self, coeffs: &RationalCoeffs, lambda: C64) -> Result<ResidualReport> {
        let grid = self.uniform_grid()?;
        let tilde = self.transformed_all(coeffs)?;
        let ws: Vec<CMat> = (0..self.len()).map(|i| self.transfer_eval(i, lambda)).collect::<Result<_>>()?;
        let rhs: Vec<CMat> = (0..self.len())
            .map(|i| {
                let (x, t) = self.coords(i);
                let g = coeffs.sample(x, t)?.g(lambda);
                Ok(&(&tilde[i].g(lambda) * &ws[i]) - &(&ws[i] * &g))
            })
            .collect::<Result<_>>()?;
        derivative_residual(&grid, &ws, &rhs)
    }

    /// Residual of the transformed generalized eigenfunction equation
    /// `(Π2^* S^{-1})_x = -(Σ q̃_k Π2^* S^{-1} A1^k + Σ q̃_{sk} Π2^* S^{-1} (A1 - c_s)^{-k})`.
    pub fn eigenfunction_residual(&self, coeffs: &RationalCoeffs) -> Result<ResidualReport> {
        let grid = self.uniform_grid()?;
        let p = Powers::for_coeffs(&self.a1, &self.a2, coeffs)?;
        let tilde = self.transformed_all(coeffs)?;
        let us: Vec<CMat> = (0..self.len())
            .map(|i| Ok(solve_linear(&self.s[i].adjoint(), &self.pi2_adj[i].adjoint())?.adjoint()))
            .collect::<Result<_>>()?;
        let rhs: Vec<CMat> = us
            .iter()
            .zip(&tilde)
            .map(|(u, q)| {
                let mut acc = CMat::zeros(u.nrows(), u.ncols());
                for (k, qk) in q.poly.iter().enumerate() {
                    acc += &(qk * u) * &p.a1[k];
                }
                for (s, (_, parts)) in q.poles.iter().enumerate() {
                    for (idx, qk) in parts.iter().enumerate() {
                        acc += &(qk * u) * &p.a1_inv[s][idx + 1];
                    }
                }
                -acc
            })
            .collect();
        derivative_residual(&grid, &us, &rhs)
    }

    /// Largest `‖X_0 - Y_0‖ / max(1, ‖X_0‖)` over the samples.
    pub fn x0_y0_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let (x0, y0) = x0_y0(&self.s[i], &self.pi1[i], &self.pi2_adj[i])?;
            worst = worst.max(x0.dist(&y0) / x0.norm_fro().max(1.0));
        }
        Ok(worst)
    }

    /// Largest `‖(I - X_{c,-1})(I + Y_{c,-1}) - I‖` over the samples.
    pub fn rk1_defect(&self, c: C64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            worst = worst.max(rk1_defect(&self.node(i)?, c)?);
        }
        Ok(worst)
    }
}

fn relative_identity_residual(a1: &CMat, a2: &CMat, s: &CMat, pi1: &CMat, pi2a: &CMat) -> f64 {
    let defect = &(&(a1 * s) - &(s * a2)) - &(pi1 * pi2a);
    let scale = a1.norm_fro() * s.norm_fro() + pi1.norm_fro() * pi2a.norm_fro();
    if scale == 0.0 {
        defect.norm_fro()
    } else {
        defect.norm_fro() / scale
    }
}

fn transfer(a1: &CMat, s: &CMat, pi1: &CMat, pi2a: &CMat, lambda: C64) -> Result<CMat> {
    let m = pi1.ncols();
    let y = solve_linear(&a1.shift(lambda), pi1).map_err(|_| Error::NearPole(format!("{lambda}")))?;
    let z = solve_linear(s, &y)?;
    Ok(&CMat::identity(m) - &(pi2a * &z))
}

fn x0_y0(s: &CMat, pi1: &CMat, pi2a: &CMat) -> Result<(CMat, CMat)> {
    let x0 = &solve_linear(&s.adjoint(), &pi2a.adjoint())?.adjoint() * pi1;
    let y0 = pi2a * &solve_linear(s, pi1)?;
    Ok((x0, y0))
}

/// `X_k = Π2^* S^{-1} M_k Π1` and `Y_k = Π2^* N_k S^{-1} Π1` for given
/// power lists `M`, `N`.
fn xy(u: &CMat, v: &CMat, pi1: &CMat, pi2a: &CMat, m: &[CMat], n: &[CMat]) -> (Vec<CMat>, Vec<CMat>) {
    let xs = m.iter().map(|mk| &(u * mk) * pi1).collect();
    let ys = n.iter().map(|nk| &(pi2a * nk) * v).collect();
    (xs, ys)
}

fn transform_with(p: &Powers, s: &CMat, pi1: &CMat, pi2a: &CMat, q: &CoeffSample) -> Result<CoeffSample> {
    let u = solve_linear(&s.adjoint(), &pi2a.adjoint())?.adjoint();
    let v = solve_linear(s, pi1)?;
    let r = q.poly.len();
    let mut poly = Vec::with_capacity(r);
    if r > 0 {
        let (x, y) = xy(&u, &v, pi1, pi2a, &p.a1[..r], &p.a2[..r]);
        for k in 0..r {
            let mut acc = q.poly[k].clone();
            for j in k + 1..r {
                let qj = &q.poly[j];
                let mut term = &(qj * &y[j - k - 1]) - &(&x[j - k - 1] * qj);
                for i in k + 2..=j {
                    term += &(&x[j - i] * qj) * &y[i - k - 2];
                }
                acc -= term;
            }
            poly.push(acc);
        }
    }
    let mut poles = Vec::with_capacity(q.poles.len());
    for (s_idx, (c, parts)) in q.poles.iter().enumerate() {
        let rs = parts.len();
        // neg[k] holds the subscript -k.
        let (xn, yn) = xy(&u, &v, pi1, pi2a, &p.a1_inv[s_idx], &p.a2_inv[s_idx]);
        let neg = |k: isize| -> usize { (-k) as usize };
        let mut out = Vec::with_capacity(rs);
        for k in 1..=rs {
            let mut acc = parts[k - 1].clone();
            for j in k..=rs {
                let qj = &parts[j - 1];
                let (ki, ji) = (k as isize, j as isize);
                let mut term = &(qj * &yn[neg(ki - ji - 1)]) - &(&xn[neg(ki - ji - 1)] * qj);
                for i in k..=j {
                    let ii = i as isize;
                    term -= &(&xn[neg(ii - ji - 1)] * qj) * &yn[neg(ki - ii - 1)];
                }
                acc += term;
            }
            out.push(acc);
        }
        poles.push((*c, out));
    }
    Ok(CoeffSample { m: q.m, poly, poles })
}

/// Transformed coefficients for a node and a coefficient sample.
pub fn transform_coeffs(node: &SNode, q: &CoeffSample) -> Result<CoeffSample> {
    let (r, poles) = q.shape_key();
    let p = Powers::new(node.a1(), node.a2(), r.saturating_sub(1), &poles)?;
    transform_with(&p, node.s(), node.pi1(), &node.pi2_adj(), q)
}

/// `‖(I - X_{c,-1})(I + Y_{c,-1}) - I‖` with
/// `X_{c,-1} = Π2^* S^{-1} (A1 - c)^{-1} Π1`, `Y_{c,-1} = Π2^* (A2 - c)^{-1} S^{-1} Π1`.
pub fn rk1_defect(node: &SNode, c: C64) -> Result<f64> {
    let m = node.m();
    let p = Powers::new(node.a1(), node.a2(), 0, &[(c, 1)])?;
    let pi2a = node.pi2_adj();
    let u = solve_linear(&node.s().adjoint(), node.pi2())?.adjoint();
    let v = solve_linear(node.s(), node.pi1())?;
    let (x, y) = xy(&u, &v, node.pi1(), &pi2a, &p.a1_inv[0], &p.a2_inv[0]);
    let id = CMat::identity(m);
    Ok((&(&id - &x[1]) * &(&id + &y[1])).dist(&id))
}

/// Options for [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EvolveOptions {
    pub ode: OdeOptions,
}

fn check_initial(node: &SNode, m: usize, tol: f64) -> Result<()> {
    if node.m() != m {
        return invalid(format!("node has {} channels, coefficients have {m}", node.m()));
    }
    let rel = relative_identity_residual(node.a1(), node.a2(), node.s(), node.pi1(), &node.pi2_adj());
    if rel > tol {
        return Err(Error::IdentityViolation { residual: rel, tolerance: tol });
    }
    Ok(())
}

fn sweep_with(
    p: &Powers,
    coeffs: &RationalCoeffs,
    a1: &CMat,
    a2: &CMat,
    init: [CMat; 3],
    sweep: Sweep,
    points: &[f64],
    opts: EvolveOptions,
) -> Result<GbdtState> {
    let err = std::cell::RefCell::new(None);
    let rhs = |z: f64, y: &[CMat]| -> Vec<CMat> {
        let (x, t) = match sweep {
            Sweep::X { t } => (z, t),
            Sweep::T { x } => (x, z),
        };
        match coeffs.sample(x, t) {
            Ok(q) => derivatives(p, &q, &y[0], &y[1]).to_vec(),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                y.iter().map(|m| m.map(|_| C64::new(f64::NAN, 0.0))).collect()
            }
        }
    };
    let traj = integrate_matrix_ode(rhs, init.to_vec(), points, opts.ode);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let traj = traj?;
    let mut pi1 = Vec::with_capacity(traj.len());
    let mut pi2_adj = Vec::with_capacity(traj.len());
    let mut s = Vec::with_capacity(traj.len());
    for step in traj {
        let [a, b, c]: [CMat; 3] = step.try_into().expect("three unknowns");
        pi1.push(a);
        pi2_adj.push(b);
        s.push(c);
    }
    Ok(GbdtState { a1: a1.clone(), a2: a2.clone(), sweep, points: points.to_vec(), pi1, pi2_adj, s })
}

/// Integrates the `Π1`, `Π2^*`, `S` equations from `node` along the `x`
/// samples of `grid` (at `t = t0`, or 0 for a 1-D grid).
pub fn evolve(coeffs: &RationalCoeffs, node: &SNode, grid: &GridSpec) -> Result<GbdtState> {
    evolve_with(coeffs, node, grid, EvolveOptions::default())
}

pub fn evolve_with(coeffs: &RationalCoeffs, node: &SNode, grid: &GridSpec, opts: EvolveOptions) -> Result<GbdtState> {
    grid.validate()?;
    check_initial(node, coeffs.m(), INITIAL_IDENTITY_TOL)?;
    evolve_sweep(coeffs, node, Sweep::X { t: grid.t0.unwrap_or(0.0) }, &grid.xs(), opts)
}

/// Integrates along an arbitrary sweep starting from `node` at
/// `points[0]`. The node may itself come from an earlier evolution, so the
/// identity is only checked to [`PROPAGATION_TOL`].
pub fn evolve_sweep(
    coeffs: &RationalCoeffs,
    node: &SNode,
    sweep: Sweep,
    points: &[f64],
    opts: EvolveOptions,
) -> Result<GbdtState> {
    check_initial(node, coeffs.m(), PROPAGATION_TOL)?;
    let p = Powers::for_coeffs(node.a1(), node.a2(), coeffs)?;
    let init = [node.pi1().clone(), node.pi2_adj(), node.s().clone()];
    sweep_with(&p, coeffs, node.a1(), node.a2(), init, sweep, points, opts)
}

/// Node data over a 2-D grid, one `x`-sweep per `t` sample.
#[derive(Clone, Debug)]
pub struct GbdtField {
    pub grid: GridSpec,
    slices: Vec<GbdtState>,
}

impl GbdtField {
    pub fn slice(&self, it: usize) -> &GbdtState {
        &self.slices[it]
    }

    pub fn slices(&self) -> &[GbdtState] {
        &self.slices
    }

    pub fn node(&self, ix: usize, it: usize) -> Result<SNode> {
        self.slices[it].node(ix)
    }

    pub fn identity_residual_max(&self) -> f64 {
        self.slices.iter().map(GbdtState::identity_residual_max).fold(0.0, f64::max)
    }

    /// Zero-curvature residual of the transformed pair `G̃`, `F̃` at `λ`.
    pub fn zero_curvature_residual(
        &self,
        g_coeffs: &RationalCoeffs,
        f_coeffs: &RationalCoeffs,
        lambda: C64,
    ) -> Result<ResidualReport> {
        let mut gs = Vec::new();
        let mut fs = Vec::new();
        for slice in &self.slices {
            let gt = slice.transformed_all(g_coeffs)?;
            let ft = slice.transformed_all(f_coeffs)?;
            gs.extend(gt.iter().map(|q| q.g(lambda)));
            fs.extend(ft.iter().map(|q| q.g(lambda)));
        }
        zero_curvature_sampled(&self.grid, &gs, &fs)
    }
}

/// Two-variable evolution: the `t`-equations (coefficients of `F`) are
/// integrated along `x = x0`, then the `x`-equations (coefficients of `G`)
/// along each `t` sample, in parallel.
pub fn evolve2d(
    g_coeffs: &RationalCoeffs,
    f_coeffs: &RationalCoeffs,
    node: &SNode,
    grid: &GridSpec,
    opts: EvolveOptions,
) -> Result<GbdtField> {
    grid.validate()?;
    if !grid.has_t() {
        return invalid("two-variable evolution needs a 2-D grid");
    }
    if g_coeffs.m() != f_coeffs.m() {
        return invalid("G and F coefficients differ in size");
    }
    check_initial(node, g_coeffs.m(), INITIAL_IDENTITY_TOL)?;
    let pg = Powers::for_coeffs(node.a1(), node.a2(), g_coeffs)?;
    let pf = Powers::for_coeffs(node.a1(), node.a2(), f_coeffs)?;
    let init = [node.pi1().clone(), node.pi2_adj(), node.s().clone()];
    let line = sweep_with(&pf, f_coeffs, node.a1(), node.a2(), init, Sweep::T { x: grid.x0 }, &grid.ts(), opts)?;
    let xs = grid.xs();
    let slices = (0..line.len())
        .into_par_iter()
        .map(|k| {
            let init = [line.pi1[k].clone(), line.pi2_adj[k].clone(), line.s[k].clone()];
            sweep_with(&pg, g_coeffs, node.a1(), node.a2(), init, Sweep::X { t: line.points[k] }, &xs, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GbdtField { grid: *grid, slices })
}
