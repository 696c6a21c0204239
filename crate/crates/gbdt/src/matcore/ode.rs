use super::{CMat, LinalgError};

/// Controls for [`integrate_matrix_ode`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    /// RK4 steps per grid interval.
    pub substeps: usize,
    /// When set, each interval is also integrated with twice the steps and
    /// refined until the two results agree to this relative tolerance.
    pub halving_tol: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { substeps: 1, halving_tol: None }
    }
}

fn axpy(y: &[CMat], k: &[CMat], h: f64) -> Vec<CMat> {
    y.iter().zip(k).map(|(a, b)| a + &b.scale_re(h)).collect()
}

/// One classical Runge-Kutta step for a system of matrix unknowns.
pub fn rk4_step<F>(rhs: &F, x: f64, y: &[CMat], h: f64) -> Vec<CMat>
where
    F: Fn(f64, &[CMat]) -> Vec<CMat>,
{
    let k1 = rhs(x, y);
    let k2 = rhs(x + h / 2.0, &axpy(y, &k1, h / 2.0));
    let k3 = rhs(x + h / 2.0, &axpy(y, &k2, h / 2.0));
    let k4 = rhs(x + h, &axpy(y, &k3, h));
    y.iter()
        .enumerate()
        .map(|(i, yi)| {
            let incr = &(&k1[i] + &k2[i].scale_re(2.0)) + &(&k3[i].scale_re(2.0) + &k4[i]);
            yi + &incr.scale_re(h / 6.0)
        })
        .collect()
}

fn advance<F>(rhs: &F, x0: f64, x1: f64, y: &[CMat], steps: usize) -> Vec<CMat>
where
    F: Fn(f64, &[CMat]) -> Vec<CMat>,
{
    let h = (x1 - x0) / steps as f64;
    let mut cur = y.to_vec();
    for s in 0..steps {
        cur = rk4_step(rhs, x0 + s as f64 * h, &cur, h);
    }
    cur
}

fn state_norm(y: &[CMat]) -> f64 {
    y.iter().map(|m| m.norm_fro().powi(2)).sum::<f64>().sqrt()
}

/// Integrates `Y' = rhs(x, Y)` and returns the state at every point of `xs`.
///
/// `xs` must be monotone (either direction); the first entry is the initial
/// point.
pub fn integrate_matrix_ode<F>(
    rhs: F,
    init: Vec<CMat>,
    xs: &[f64],
    opts: OdeOptions,
) -> Result<Vec<Vec<CMat>>, LinalgError>
where
    F: Fn(f64, &[CMat]) -> Vec<CMat>,
{
    if opts.substeps == 0 {
        return Err(LinalgError::InvalidGrid("substeps must be positive".into()));
    }
    let mut out = Vec::with_capacity(xs.len());
    if xs.is_empty() {
        return Ok(out);
    }
    if init.iter().any(|m| !m.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    out.push(init);
    for w in xs.windows(2) {
        let y = out.last().expect("nonempty");
        let mut steps = opts.substeps;
        let mut next = advance(&rhs, w[0], w[1], y, steps);
        if let Some(tol) = opts.halving_tol {
            loop {
                let fine = advance(&rhs, w[0], w[1], y, 2 * steps);
                let diff: f64 = next
                    .iter()
                    .zip(&fine)
                    .map(|(a, b)| a.dist(b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                next = fine;
                steps *= 2;
                if diff <= tol * state_norm(&next).max(1.0) || steps > 1 << 12 {
                    break;
                }
            }
        }
        if next.iter().any(|m| !m.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{c64, expm, GridSpec};
    use super::*;

    #[test]
    fn linear_system_against_expm() {
        let a = CMat::from_rows(&[vec![c64(0.0, 1.0), c64(0.5, 0.0)], vec![c64(-0.5, 0.0), c64(0.1, -1.0)]]).unwrap();
        let d = CMat::from_rows(&[vec![c64(1.0, 0.0), c64(0.0, 0.0)], vec![c64(0.0, 0.0), c64(-1.0, 0.0)]]).unwrap();
        let pi0 = CMat::from_rows(&[vec![c64(1.0, 0.0), c64(0.2, 0.3)], vec![c64(0.0, -1.0), c64(1.0, 0.0)]]).unwrap();
        let grid = GridSpec::new(0.0, 2.0, 2001).unwrap();
        let rhs = |_x: f64, y: &[CMat]| vec![(&(&a * &y[0]) * &d).scale(c64(0.0, -1.0))];
        let sol = integrate_matrix_ode(rhs, vec![pi0.clone()], &grid.xs(), OdeOptions::default()).unwrap();
        // Pi(x) = exp(-i x A) Pi0 restricted to the j-eigenspaces of D.
        for (i, x) in grid.xs().iter().enumerate().step_by(250) {
            let e_minus = expm(&a.scale(c64(0.0, -1.0)), *x).unwrap();
            let e_plus = expm(&a.scale(c64(0.0, 1.0)), *x).unwrap();
            let want = CMat::hstack(&[&(&e_minus * &pi0.columns(0, 1)), &(&e_plus * &pi0.columns(1, 1))]);
            assert!(sol[i][0].dist(&want) < 1e-8, "x={x}");
        }
    }

    #[test]
    fn fourth_order() {
        let rhs = |x: f64, y: &[CMat]| vec![y[0].scale(c64(x.cos(), 1.0))];
        let exact = |x: f64| c64(x.sin(), x).exp();
        let err = |n: usize| {
            let g = GridSpec::new(0.0, 2.0, n).unwrap();
            let sol = integrate_matrix_ode(rhs, vec![CMat::identity(1)], &g.xs(), OdeOptions::default()).unwrap();
            (sol.last().unwrap()[0][(0, 0)] - exact(2.0)).norm()
        };
        let order = (err(21) / err(41)).log2();
        assert!(order >= 3.7, "order {order}");
    }

    #[test]
    fn halving_control() {
        let rhs = |_x: f64, y: &[CMat]| vec![y[0].scale(c64(0.0, 30.0))];
        let opts = OdeOptions { substeps: 1, halving_tol: Some(1e-10) };
        let sol = integrate_matrix_ode(rhs, vec![CMat::identity(1)], &[0.0, 0.5, 1.0], opts).unwrap();
        assert!((sol[2][0][(0, 0)] - c64(0.0, 30.0).exp()).norm() < 1e-8);
    }

    #[test]
    fn blowup_reported() {
        let rhs = |_x: f64, y: &[CMat]| vec![&y[0] * &y[0]];
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let r = integrate_matrix_ode(rhs, vec![CMat::scalar(c64(10.0, 0.0))], &xs, OdeOptions::default());
        assert!(matches!(r, Err(LinalgError::NonFinite)));
    }
}
