mod common;

use common::{c, grid, simpson, spectral_norm, sup_dist, uniform};
use gbdt::dirac::{
    gpe_inverse, gpe_scattering, max_norm_on_real_axis, potential_sup, real_samples, reflection_from_weyl,
    s_positive_on, skew_weyl_direct, skew_weyl_inverse, weyl_direct, weyl_inverse, DiracKind, DiracSeed,
};
use gbdt::gbdt_core::evolve;
use gbdt::matcore::{eigenvalues, integrate_matrix_ode, solve_linear, OdeOptions, I};
use gbdt::samples::{random_gpe_seed, random_pe_seed, random_skew_seed};
use gbdt::{CMat, Error, Realization};

fn scalar_seed() -> DiracSeed {
    DiracSeed::pe(CMat::scalar(I), CMat::scalar(c(3f64.sqrt(), 0.0)), CMat::scalar(c(1.0, 0.0))).unwrap()
}

fn relative_identity_defect(seed: &DiracSeed, x: f64) -> f64 {
    let s = seed.s_integrated(x).unwrap();
    let pi = seed.pi_at(x).unwrap();
    let w = if seed.kind() == DiracKind::SkewSelfAdjoint { CMat::identity(seed.m()) } else { seed.j() };
    let a = seed.a();
    let lhs = &(a * &s) - &(&s * &a.adjoint());
    let rhs = (&(&pi * &w) * &pi.adjoint()).scale(I);
    lhs.dist(&rhs) / (2.0 * a.norm_fro() * s.norm_fro() + pi.norm_fro().powi(2))
}

#[test]
fn zero_phi1_gives_zero_potential() {
    let seed = DiracSeed::pe(CMat::scalar(c(0.7, 0.0)), CMat::zeros(1, 1), CMat::zeros(1, 1)).unwrap();
    let v = seed.potential(&grid(0.0, 3.0, 31)).unwrap();
    assert!(v.values().iter().all(|m| m.max_abs() == 0.0));
    let phi = weyl_direct(&seed).unwrap();
    assert!(phi.eval(c(0.3, 2.0)).unwrap().dist(&CMat::scalar(I)) < 1e-15);
    assert_eq!(reflection_from_weyl(&phi).unwrap().order(), 0);
}

#[test]
fn free_solution_for_trivial_seed() {
    let seed = DiracSeed::zero(DiracKind::SelfAdjoint, 1, 1);
    let lam = c(0.4, 0.3);
    let u = seed.fundamental_solution(1.3, lam).unwrap();
    assert!(u.dist(&seed.free_solution(1.3, lam)) < 1e-15);
}

#[test]
fn scalar_potential_bounded_with_second_order_darboux_residual() {
    let seed = scalar_seed();
    let v = seed.potential(&grid(0.0, 5.0, 501)).unwrap();
    assert!(v.values().iter().all(|m| m.max_abs() < 10.0));
    let coeffs = seed.gbdt_coeffs();
    let node = seed.node_at(0.0).unwrap();
    let lam = c(0.5, 1.5);
    let coarse = evolve(&coeffs, &node, &grid(0.0, 5.0, 251)).unwrap().darboux_residual(&coeffs, lam).unwrap();
    let fine = evolve(&coeffs, &node, &grid(0.0, 5.0, 501)).unwrap().darboux_residual(&coeffs, lam).unwrap();
    let order = fine.with_order_from(&coarse).order.unwrap();
    assert!((1.8..=2.2).contains(&order), "order {order}");
}

#[test]
fn closed_forms_agree_with_generic_evolution() {
    for (k, kind) in [DiracKind::SelfAdjoint, DiracKind::SkewSelfAdjoint].into_iter().enumerate() {
        let mut u = uniform(10 + k as u64);
        let seed = match kind {
            DiracKind::SelfAdjoint => random_pe_seed(2, 1, &mut u).unwrap(),
            _ => random_skew_seed(2, 1, &mut u).unwrap(),
        };
        let coeffs = seed.gbdt_coeffs();
        let g = grid(0.0, 2.0, 801);
        let state = evolve(&coeffs, &seed.node_at(0.0).unwrap(), &g).unwrap();
        let j = seed.j();
        for i in (0..g.nx).step_by(100) {
            let x = g.x(i);
            let s = seed.s_at(x).unwrap();
            assert!(state.s(i).dist(&s) < 1e-8 * s.norm_fro(), "S at {x}");
            assert!(state.pi1(i).dist(&seed.pi_at(x).unwrap()) < 1e-8, "Pi at {x}");
            let q0 = state.transformed_coeffs(&coeffs, i).unwrap().poly[0].clone();
            let vv = seed.block_potential(&seed.potential_at(x).unwrap());
            let want = match kind {
                DiracKind::SkewSelfAdjoint => -(&j * &vv),
                _ => (&j * &vv).scale(-I),
            };
            assert!(q0.dist(&want) < 1e-9 * want.norm_fro().max(1.0), "q0 at {x}");
        }
    }
}

#[test]
fn identity_propagates_along_x() {
    let mut u = uniform(3);
    let seeds = [
        scalar_seed(),
        random_pe_seed(3, 2, &mut u).unwrap(),
        random_skew_seed(3, 1, &mut u).unwrap(),
        random_gpe_seed(2, 1, 1, false, &mut u).unwrap(),
    ];
    for seed in &seeds {
        for x in [0.5, 2.0, 5.0] {
            let d = relative_identity_defect(seed, x);
            assert!(d < 1e-7, "{:?} at {x}: {d}", seed.kind());
        }
    }
}

#[test]
fn sylvester_and_integrated_s_agree() {
    let mut u = uniform(4);
    for _ in 0..5 {
        let seed = random_pe_seed(3, 1, &mut u).unwrap();
        for x in [0.2, 1.0, 3.5] {
            let a = seed.s_sylvester(x).unwrap();
            let b = seed.s_integrated(x).unwrap();
            assert!(a.dist(&b) < 1e-9 * a.norm_fro(), "x = {x}");
        }
    }
}

#[test]
fn s_positive_for_pe_and_skew() {
    let mut u = uniform(5);
    let g = grid(0.0, 5.0, 201);
    for _ in 0..3 {
        assert!(s_positive_on(&random_pe_seed(3, 2, &mut u).unwrap(), &g).unwrap());
        assert!(s_positive_on(&random_skew_seed(3, 2, &mut u).unwrap(), &g).unwrap());
    }
}

#[test]
fn fundamental_solution_solves_system() {
    let mut u = uniform(6);
    let seed = random_pe_seed(2, 1, &mut u).unwrap();
    let lam = c(0.7, 0.4);
    let rep = gbdt::residuals::ode_residual(
        |x| seed.fundamental_solution(x, lam),
        |x| Ok(seed.system_matrix(&seed.potential_at(x)?, lam)),
        &grid(0.0, 3.0, 301),
    )
    .unwrap();
    let order = rep.order.unwrap();
    assert!((1.8..=2.2).contains(&order), "order {order}");
    assert!(seed.fundamental_solution(0.0, lam).unwrap().dist(&CMat::identity(2)) < 1e-12);
    for _ in 0..20 {
        let x = 2.5 * (u() + 1.0);
        let lam = c(3.0 * u(), 2.0 * u());
        let d = gbdt::matcore::det(&seed.fundamental_solution(x, lam).unwrap()).unwrap();
        assert!(d.norm() > 1e-8, "det {d} at x = {x}, λ = {lam}");
    }
}

#[test]
fn skew_fundamental_solution_solves_system() {
    let mut u = uniform(7);
    let seed = random_skew_seed(2, 1, &mut u).unwrap();
    let lam = c(-0.3, -0.8);
    let rep = gbdt::residuals::ode_residual(
        |x| seed.fundamental_solution(x, lam),
        |x| Ok(seed.system_matrix(&seed.potential_at(x)?, lam)),
        &grid(0.0, 3.0, 301),
    )
    .unwrap();
    let order = rep.order.unwrap();
    assert!((1.8..=2.2).contains(&order), "order {order}");
}

#[test]
fn weyl_inequality_tail_decreases() {
    let seed = scalar_seed();
    let lam = c(0.0, 2.0);
    let phi = weyl_direct(&seed).unwrap().eval(lam).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let k_adj = CMat::from_real(&[&[r, r], &[-r, r]]);
    let col = CMat::vstack(&[&CMat::identity(1), &phi.scale(-I)]);
    let v = &k_adj * &col;
    let integrand = |x: f64| {
        let psi = &seed.fundamental_solution(x, lam).unwrap() * &v;
        &psi.adjoint() * &psi
    };
    let parts: Vec<f64> =
        [(0.0, 2.5), (2.5, 5.0), (5.0, 10.0)].iter().map(|&(a, b)| simpson(integrand, a, b, 400)[(0, 0)].re).collect();
    assert!(parts.iter().all(|p| *p >= 0.0));
    assert!(parts[1] < 1e-2 * parts[0] && parts[2] < 1e-2 * parts[1], "{parts:?}");
}

#[test]
fn scalar_reflection_contractive() {
    let phi = weyl_direct(&scalar_seed()).unwrap();
    let r = reflection_from_weyl(&phi).unwrap();
    assert!(max_norm_on_real_axis(&r, 50).unwrap() <= 1.0);
    assert!(r.eval(c(1e6, 0.0)).unwrap().max_abs() < 1e-5);
}

#[test]
fn scalar_weyl_round_trip() {
    let seed = scalar_seed();
    let phi = weyl_direct(&seed).unwrap();
    let back = weyl_inverse(&phi.realization).unwrap();
    let g = grid(0.0, 5.0, 501);
    assert!(sup_dist(&seed.potential(&g).unwrap(), &back.potential(&g).unwrap()) < 1e-6);
    assert_eq!(weyl_inverse(&Realization::constant(CMat::scalar(I))).unwrap().n(), 0);
}

#[test]
fn random_weyl_round_trips() {
    let mut u = uniform(8);
    let g = grid(0.0, 5.0, 201);
    for k in 0..6 {
        let seed = random_pe_seed(1 + k % 4, 1 + k % 2, &mut u).unwrap();
        let phi = weyl_direct(&seed).unwrap();
        assert!(phi.is_herglotz());
        let back = weyl_inverse(&phi.realization).unwrap();
        let d = sup_dist(&seed.potential(&g).unwrap(), &back.potential(&g).unwrap());
        assert!(d < 1e-6, "seed {k}: {d}");
    }
}

#[test]
fn non_herglotz_rejected() {
    let phi = Realization::new(CMat::scalar(-I), CMat::identity(1), CMat::scalar(c(5.0, 0.0)), CMat::scalar(I)).unwrap();
    assert!(matches!(weyl_inverse(&phi), Err(Error::NotAdmissible(_))));
}

#[test]
fn skew_zero_phi2() {
    let seed = DiracSeed::skew(CMat::scalar(c(0.0, 0.5)), CMat::scalar(c(1.0, 0.0)), CMat::zeros(1, 1)).unwrap();
    let phi = skew_weyl_direct(&seed).unwrap();
    assert_eq!(phi.eval(c(0.0, -3.0)).unwrap().max_abs(), 0.0);
    let v = seed.potential(&grid(0.0, 2.0, 21)).unwrap();
    assert!(v.values().iter().all(|m| m.max_abs() == 0.0));
    assert_eq!(skew_weyl_inverse(&Realization::constant(CMat::zeros(1, 1))).unwrap().n(), 0);
}

#[test]
fn skew_weyl_strictly_proper_and_square_integrable() {
    let mut u = uniform(9);
    let seed = random_skew_seed(3, 1, &mut u).unwrap();
    let phi = skew_weyl_direct(&seed).unwrap();
    let data = seed.phi1().norm_fro() * seed.phi2().norm_fro();
    assert!(phi.eval(c(0.0, 1e6)).unwrap().norm_fro() <= 1e-4 * data);
    let m1 = potential_sup(&seed, &grid(0.0, 10.0, 1001)).unwrap();
    let lam = c(0.0, -(m1 + 1.0));
    let f = phi.eval(lam).unwrap();
    let v = CMat::vstack(&[&f, &CMat::identity(1)]);
    let integrand = |x: f64| {
        let psi = &seed.fundamental_solution(x, lam).unwrap() * &v;
        &psi.adjoint() * &psi
    };
    let parts: Vec<f64> =
        [(0.0, 2.0), (2.0, 4.0), (4.0, 6.0)].iter().map(|&(a, b)| simpson(integrand, a, b, 400)[(0, 0)].re).collect();
    assert!(parts[1] < parts[0] && parts[2] < parts[1], "{parts:?}");
}

#[test]
fn skew_scalar_family_round_trip() {
    for cc in [0.5, 1.0, 3.0] {
        let phi = Realization::new(CMat::scalar(c(0.0, cc)), CMat::identity(1), CMat::identity(1), CMat::zeros(1, 1))
            .unwrap();
        let seed = skew_weyl_inverse(&phi).unwrap();
        let back = skew_weyl_direct(&seed).unwrap();
        for k in 0..30 {
            let lam = c(-3.0 + 0.2 * k as f64, -0.5 - 0.1 * k as f64);
            assert!(back.eval(lam).unwrap().dist(&phi.eval(lam).unwrap()) < 1e-8);
        }
    }
}

#[test]
fn skew_random_round_trips() {
    let mut u = uniform(11);
    let g = grid(0.0, 5.0, 201);
    for k in 0..4 {
        let seed = random_skew_seed(1 + k % 3, 1, &mut u).unwrap();
        let phi = skew_weyl_direct(&seed).unwrap();
        let back = skew_weyl_inverse(&phi.realization).unwrap();
        let d = sup_dist(&seed.potential(&g).unwrap(), &back.potential(&g).unwrap());
        assert!(d < 1e-6, "seed {k}: {d}");
    }
}

#[test]
fn skew_unitarity_uses_conjugate_shift() {
    let mut u = uniform(12);
    let seed = random_skew_seed(3, 1, &mut u).unwrap();
    for (x, lam) in [(0.0, c(0.3, 1.0)), (1.5, c(-2.0, -0.7)), (4.0, c(1.0, 0.2))] {
        assert!(seed.unitarity_defect(x, lam).unwrap() < 1e-9);
    }
    // The unconjugated shift fails off the real axis.
    let (x, lam) = (1.0, c(0.4, 0.9));
    let w = seed.transfer_at(x, lam).unwrap();
    let pi = seed.pi_at(x).unwrap();
    let s = seed.s_at(x).unwrap();
    let inner = solve_linear(&s, &solve_linear(&seed.a().shift(lam), &pi).unwrap()).unwrap();
    let left = solve_linear(&seed.a().adjoint().shift(lam), &inner).unwrap();
    let printed = &CMat::identity(2) - &(&pi.adjoint() * &left).scale(I * (lam - lam.conj()));
    assert!((&(&w.adjoint() * &w) - &printed).max_abs() > 1e-3);
    for lam in [c(0.0, -0.5), c(2.0, -3.0), c(-1.0, -0.1)] {
        assert!(spectral_norm(&seed.transfer_at(2.0, lam).unwrap()) <= 1.0 + 1e-9);
    }
}

fn gpe_seed_with_gap(seed: u64, gap: f64) -> DiracSeed {
    let mut u = uniform(seed);
    loop {
        let s = random_gpe_seed(2, 1, 1, true, &mut u).unwrap();
        if eigenvalues(s.a()).unwrap().iter().all(|z| z.im > gap) {
            return s;
        }
    }
}

#[test]
fn gpe_trivial_coupling() {
    let seed = DiracSeed::zero(DiracKind::GeneralizedPe, 1, 1);
    let sc = gpe_scattering(&seed).unwrap();
    let lam = c(0.5, 0.0);
    assert_eq!(sc.r_l.eval(lam).unwrap().max_abs(), 0.0);
    assert_eq!(sc.t_l.eval(lam).unwrap(), CMat::identity(1));
    assert_eq!(gpe_inverse(&Realization::constant(CMat::zeros(1, 1))).unwrap().n(), 0);
}

#[test]
fn gpe_reflection_contractive() {
    let mut u = uniform(13);
    for _ in 0..3 {
        let seed = random_gpe_seed(2, 1, 1, false, &mut u).unwrap();
        let sc = gpe_scattering(&seed).unwrap();
        assert!(max_norm_on_real_axis(&sc.r_l, 50).unwrap() <= 1.0 + 1e-9);
        assert!(sc.r_l.eval(c(1e6, 0.0)).unwrap().max_abs() < 1e-4);
        assert!(sc.omega_step <= 1e-8 * sc.omega.norm_fro().max(1.0));
    }
}

#[test]
fn gpe_reflection_matches_shooting() {
    let seed = gpe_seed_with_gap(14, 0.4);
    let sc = gpe_scattering(&seed).unwrap();
    let l = 40.0;
    let n = 8000;
    let xs: Vec<f64> = (0..=n).map(|k| l * (1.0 - k as f64 / n as f64)).collect();
    for lam in [-2.0, -0.5, 0.0, 0.8, 3.0] {
        let lam = c(lam, 0.0);
        let init = CMat::col_vec(&[(I * lam * l).exp(), c(0.0, 0.0)]);
        let rhs = |x: f64, y: &[CMat]| vec![&seed.system_matrix(&seed.potential_at(x).unwrap(), lam) * &y[0]];
        let traj = integrate_matrix_ode(rhs, vec![init], &xs, OdeOptions { substeps: 2, halving_tol: None }).unwrap();
        let y0 = &traj.last().unwrap()[0];
        let r = y0[(1, 0)] / y0[(0, 0)];
        let want = sc.r_l.eval(lam).unwrap()[(0, 0)];
        assert!((r - want).norm() < 1e-6, "λ = {lam}: {r} vs {want}");
    }
}

#[test]
fn gpe_round_trip_definite() {
    let mut u = uniform(15);
    let g = grid(0.0, 5.0, 201);
    for _ in 0..3 {
        let seed = random_gpe_seed(2, 1, 1, true, &mut u).unwrap();
        let sc = gpe_scattering(&seed).unwrap();
        let back = gpe_inverse(&sc.r_l).unwrap();
        let sc2 = gpe_scattering(&back).unwrap();
        for lam in real_samples(20, 2.0) {
            assert!(sc2.r_l.eval(lam).unwrap().dist(&sc.r_l.eval(lam).unwrap()) < 1e-8);
        }
        let d = sup_dist(&seed.potential(&g).unwrap(), &back.potential(&g).unwrap());
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn gpe_singular_potential_flagged_and_recovered() {
    let mut u = uniform(16);
    let seed = random_gpe_seed(2, 1, 1, false, &mut u).unwrap();
    let g = grid(0.0, 20.0, 4001);
    let zeros = seed.singular_points(&g).unwrap();
    assert!(!zeros.is_empty());
    for &z in &zeros {
        let s = seed.s_at(z).unwrap();
        let d = gbdt::matcore::det(&s).unwrap().norm();
        assert!(d < 1e-8 * s.norm_fro().powi(2), "det {d} at {z}");
    }
    let last = zeros.iter().cloned().fold(f64::MIN, f64::max);
    for x in [last + 0.5, last + 2.0] {
        assert!(gbdt::matcore::is_posdef(&seed.s_at(x).unwrap()).unwrap());
    }
    let v = seed.potential(&g).unwrap();
    let sc = gpe_scattering(&seed).unwrap();
    let back = gpe_inverse(&sc.r_l).unwrap();
    let w = back.potential(&g).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..g.nx {
        let x = g.x(i);
        if zeros.iter().any(|z| (z - x).abs() < 0.05) || v.is_flagged(i) || w.is_flagged(i) {
            continue;
        }
        worst = worst.max(v.values()[i].dist(&w.values()[i]) / v.values()[i].norm_fro().max(1.0));
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn singular_sample_flagged() {
    let mut u = uniform(16);
    let seed = random_gpe_seed(2, 1, 1, false, &mut u).unwrap();
    let zeros = seed.singular_points(&grid(0.0, 20.0, 2001)).unwrap();
    let z = zeros[0];
    let g = grid(z - 1.0, z + 1.0, 3);
    let v = seed.potential(&g).unwrap();
    assert!(v.is_flagged(1));
    assert!(v.to_csv().lines().nth(2).unwrap().contains("NaN"));
    assert!(matches!(seed.fundamental_solution(z, c(0.3, 0.2)), Err(Error::Numerical(_))));
}

#[test]
fn non_contractive_reflection_rejected() {
    let r = Realization::new(CMat::scalar(-I), CMat::identity(1), CMat::scalar(c(0.0, 1.1)), CMat::zeros(1, 1)).unwrap();
    assert!(matches!(gpe_inverse(&r), Err(Error::NotAdmissible(_))));
}
