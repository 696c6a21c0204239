//! End-to-end acceptance checks, one line of output per criterion.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gbdt::dirac::{
    gpe_inverse, gpe_scattering, max_norm_on_real_axis, real_samples, reflection_from_weyl, skew_weyl_direct,
    skew_weyl_inverse, weyl_direct, weyl_inverse,
};
use gbdt::gbdt_core::{evolve, evolve_with, Coefficient, EvolveOptions, PolePart, RationalCoeffs};
use gbdt::matcore::{inverse, k_breve, min_eigenvalue, j_breve, OdeOptions, I};
use gbdt::nonlinear::{
    elliptic_coeffs, elliptic_transform, n_modulation_period, nls_solution, nwave_inverse, nwave_solution, nwave_weyl,
    chiral_transform, weyl_defects, ChiralBackground, EllipticSeed, EllipticVariant, NWaveSeed, NlsBackground,
    NlsSeed, ScalarBackground,
};
use gbdt::radial::{psi2_for, radial_gbdt_step, radial_q0, ExplicitRadial, RadialSeed, RadialStep};
use gbdt::residuals::{estimate_order, pde_residual_order, PdeKind};
use gbdt::samples::{random_cmat, random_gpe_seed, random_nwave_seed, random_pe_seed, random_skew_seed, random_triangular_node};
use gbdt::{c64, CMat, GridSpec, SNode, SolutionGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

trait OrFail<T> {
    fn or_fail(self, what: &str) -> Result<T, String>;
}

impl<T, E: std::fmt::Display> OrFail<T> for Result<T, E> {
    fn or_fail(self, what: &str) -> Result<T, String> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(seed: u64) -> impl FnMut() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.gen_range(-1.0..1.0)
}

fn c(re: f64, im: f64) -> C64 {
    c64(re, im)
}

fn grid(x0: f64, x1: f64, nx: usize) -> GridSpec {
    GridSpec::new(x0, x1, nx).unwrap()
}

fn grid2(x0: f64, x1: f64, nx: usize, t0: f64, t1: f64, nt: usize) -> GridSpec {
    GridSpec::new_2d(x0, x1, nx, t0, t1, nt).unwrap()
}

fn second_order(order: f64) -> bool {
    (1.8..=2.2).contains(&order)
}

fn nwave_seed(seed: u64, n: usize, b: Vec<f64>) -> NWaveSeed {
    let m = b.len();
    let d: Vec<f64> = (0..m).map(|k| (m - k) as f64).collect();
    let d_hat: Vec<f64> = (0..m).map(|k| 0.5 - 0.7 * k as f64).collect();
    random_nwave_seed(n, d, d_hat, b, &mut uniform(seed)).unwrap()
}

fn radial_sample_q0() -> Coefficient {
    Coefficient::function(|x, _| radial_q0(0.3 * x.cos(), 0.2, x.sin()))
}

/// One GBDT step of the radial system with `S(x0) = I` and random `Π(x0)`.
fn radial_step(seed: u64, g: &GridSpec) -> Result<RadialStep, String> {
    let mut u = uniform(seed);
    let pi = random_cmat(2, 2, &mut u);
    let h = random_cmat(2, 2, &mut u).hermitian_part();
    let a = &h + &(&(&pi * &j_breve()) * &pi.adjoint()).scale_re(0.5);
    radial_gbdt_step(radial_sample_q0(), a, CMat::identity(2), pi, g).or_fail("radial step")
}

fn chiral_node(seed: u64) -> SNode {
    let mut u = uniform(seed);
    let a1 = CMat::scalar(c(0.3, 2.0));
    let a2 = CMat::scalar(c(-0.2, -1.5));
    let pi1 = random_cmat(1, 2, &mut u);
    let pi2 = random_cmat(1, 2, &mut u);
    let s = (&pi1 * &pi2.adjoint()).scale((a1[(0, 0)] - a2[(0, 0)]).inv());
    SNode::new(a1, a2, s, pi1, pi2).unwrap()
}

fn two_state(variant: EllipticVariant) -> EllipticSeed {
    EllipticSeed::two_state(variant, c(0.4, 0.9), c(1.0, 0.5), c(0.3, -0.7)).unwrap()
}

fn kink() -> ScalarBackground {
    ScalarBackground::new(|x, _| 4.0 * x.exp().atan(), |x, _| 2.0 / x.cosh(), |_, _| 0.0)
}

fn simpson(f: impl Fn(f64) -> CMat, a: f64, b: f64, n: usize) -> CMat {
    let h = (b - a) / n as f64;
    let mut acc = &f(a) + &f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + h * i as f64).scale_re(w);
    }
    acc.scale_re(h / 3.0)
}

// ------------------------------------------------------------------ 1

fn node_algebra() -> Check {
    let mut u = uniform(1);
    let (mut inv_worst, mut fac_worst): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let n = 1 + k % 6;
        let m = 1 + (k / 6) % 4;
        let node = random_triangular_node(n, m, &mut u).or_fail("node")?;
        let (f1, f2) = node.factorize(k % (n + 1)).or_fail("factorize")?;
        let id = CMat::identity(m);
        for _ in 0..20 {
            let lam = c(3.0 * u(), 0.5 * u());
            let w = node.transfer_eval(lam).or_fail("w")?;
            let wi = node.transfer_inverse_eval(lam).or_fail("w^-1")?;
            inv_worst = inv_worst.max((&w * &wi).dist(&id));
            let prod = &f2.transfer_eval(lam).or_fail("w2")? * &f1.transfer_eval(lam).or_fail("w1")?;
            fac_worst = fac_worst.max(prod.dist(&w));
        }
    }
    ensure(inv_worst <= 1e-10, || format!("|w w^-1 - I| = {inv_worst:.2e}"))?;
    ensure(fac_worst <= 1e-9, || format!("|w2 w1 - w| = {fac_worst:.2e}"))?;
    Ok(format!("100 nodes x 20 points: |w w^-1 - I| <= {inv_worst:.1e}, |w2 w1 - w| <= {fac_worst:.1e}"))
}

// ------------------------------------------------------------------ 2

fn identity_propagation() -> Check {
    let g = grid(0.0, 5.0, 5001);
    let mut u = uniform(2);
    let mut rows = Vec::new();
    let pe = random_pe_seed(3, 2, &mut u).or_fail("PE seed")?;
    let skew = random_skew_seed(3, 1, &mut u).or_fail("skew seed")?;
    let gpe = random_gpe_seed(2, 1, 1, true, &mut u).or_fail("GPE seed")?;
    for (name, seed) in [("PE", &pe), ("skew", &skew), ("GPE", &gpe)] {
        let st = evolve(&seed.gbdt_coeffs(), &seed.node_at(0.0).or_fail("node")?, &g).or_fail(name)?;
        rows.push((name, st.identity_residual_max()));
    }
    let nw = nwave_seed(3, 2, vec![1.0, 1.0, 1.0]);
    let st = evolve(&nw.coeffs().0, &nw.node_at(0.0, 0.0).or_fail("node")?, &g).or_fail("N-wave")?;
    rows.push(("N-wave", st.identity_residual_max()));
    let nls = NlsSeed::new(vec![I], vec![[c(1.0, 0.0), c(1.0, 0.0)]], NlsBackground::Zero).or_fail("NLS seed")?;
    let st = evolve(&nls.coeffs().0, &nls.node_at(0.0, 0.0).or_fail("node")?, &g).or_fail("NLS")?;
    rows.push(("NLS", st.identity_residual_max()));
    let bg = ChiralBackground::diagonal_exponential(vec![1.0, -0.5], vec![0.3, 0.7]).or_fail("background")?;
    let st = evolve(&bg.coeffs().0, &chiral_node(40), &g).or_fail("chiral")?;
    rows.push(("chiral", st.identity_residual_max()));
    for variant in [EllipticVariant::SineGordon, EllipticVariant::SinhGordon] {
        let seed = two_state(variant);
        let st = evolve(&elliptic_coeffs(variant, &ScalarBackground::zero()).0, &seed.node().or_fail("node")?, &g)
            .or_fail("elliptic")?;
        rows.push((if variant == EllipticVariant::SineGordon { "sG" } else { "shG" }, st.identity_residual_max()));
    }
    rows.push(("radial", radial_step(5, &g)?.state().identity_residual_max()));
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let text = rows.iter().map(|(n, r)| format!("{n} {r:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(worst <= 1e-7, || format!("relative identity residual too large: {text}"))?;
    Ok(format!("nx = 5001 on [0,5]: {text}"))
}

// ------------------------------------------------------------------ 3

fn darboux_property() -> Check {
    let mut u = uniform(3);
    let mut rows = Vec::new();
    let pe = random_pe_seed(2, 1, &mut u).or_fail("PE seed")?;
    let skew = random_skew_seed(2, 1, &mut u).or_fail("skew seed")?;
    let lam = c(0.5, 1.5);
    for (name, seed) in [("PE", &pe), ("skew", &skew)] {
        let q = seed.gbdt_coeffs();
        let node = seed.node_at(0.0).or_fail("node")?;
        let r = |g: &GridSpec| evolve(&q, &node, g).and_then(|st| st.darboux_residual(&q, lam));
        let coarse = r(&grid(0.0, 5.0, 251)).or_fail(name)?;
        let fine = r(&grid(0.0, 5.0, 501)).or_fail(name)?;
        rows.push((name, estimate_order(coarse.max_residual, fine.max_residual)));
    }
    let nw = nwave_seed(22, 1, vec![1.0, 1.0]);
    let q = nw.coeffs().0;
    let node = nw.node_at(0.0, 0.0).or_fail("node")?;
    let lam = c(0.3, 0.8);
    let r = |g: &GridSpec| evolve(&q, &node, g).and_then(|st| st.darboux_residual(&q, lam));
    let coarse = r(&grid(0.0, 1.0, 101)).or_fail("N-wave")?;
    let fine = r(&grid(0.0, 1.0, 201)).or_fail("N-wave")?;
    rows.push(("N-wave", estimate_order(coarse.max_residual, fine.max_residual)));
    let g = grid(0.5, 3.0, 101);
    let lam = c(0.7, 0.3);
    let coarse = radial_step(5, &g)?.darboux_residual(lam).or_fail("radial")?;
    let fine = radial_step(5, &g.refined())?.darboux_residual(lam).or_fail("radial")?;
    rows.push(("radial", estimate_order(coarse.max_residual, fine.max_residual)));
    let text = rows.iter().map(|(n, o)| format!("{n} {o:.3}")).collect::<Vec<_>>().join(", ");
    ensure(rows.iter().all(|r| second_order(r.1)), || format!("orders {text}"))?;
    Ok(format!("measured orders: {text}"))
}

// ------------------------------------------------------------------ 4

fn one_point(a: f64, alpha: C64) -> Result<ExplicitRadial, String> {
    let pi0 = &CMat::row_vec(&[c(1.0, 0.0), alpha]) * &k_breve().adjoint();
    ExplicitRadial::new(CMat::scalar(c(a, 0.0)), CMat::zeros(1, 1), pi0).or_fail("one-point node")
}

fn radial_closed_forms() -> Check {
    let a = 0.8;
    let node = one_point(a, c(1.0, 0.0))?;
    let (mut ws, mut wv): (f64, f64) = (0.0, 0.0);
    for x in grid(0.1, 5.0, 491).xs() {
        ws = ws.max((node.s_at(x).or_fail("S")?[(0, 0)] - c(2.0 * x, 0.0)).norm());
        let v = node.components(x).or_fail("components")?.v_star.re;
        wv = wv.max((v + (2.0 * a * x).cos() / x).abs());
    }
    ensure(ws <= 1e-10, || format!("S deviation {ws:.2e}"))?;
    ensure(wv <= 1e-9, || format!("v_* deviation {wv:.2e}"))?;
    let mut fits = Vec::new();
    for (alpha, want) in [(c(1.0, 0.0), -1.0), (c(-1.0, 0.0), 1.0), (c(0.0, 1.0), 0.0)] {
        let k = one_point(a, alpha)?.kappa_fit().or_fail("fit")?;
        ensure((k - want).abs() <= 1e-3, || format!("alpha = {alpha}: fitted {k}, expected {want}"))?;
        fits.push(k);
    }
    Ok(format!("|S - 2x| <= {ws:.1e}, |v_* + cos(2Ax)/x| <= {wv:.1e}, fitted kappa {fits:.4?}"))
}

// ------------------------------------------------------------------ 5

fn sign_law() -> Check {
    let a2_two = CMat::from_rows(&[vec![c(0.4, 0.0), c(0.0, 0.0)], vec![c(0.3, 0.2), c(-0.5, 0.0)]]).unwrap();
    let a2_one = CMat::scalar(c(0.6, 0.0));
    let with_regular = |kappa: i64, a2: &CMat, g: &[C64]| {
        RadialSeed::new(
            kappa,
            CMat::scalar(c(0.0, 1.0)),
            CMat::scalar(c(1.0, 0.0)),
            CMat::row_vec(&[c(1.0, 0.0), c(0.0, -1.0)]),
            a2.clone(),
            psi2_for(kappa, g)?,
        )
    };
    let g1 = [c(1.0, 0.0)];
    let g2 = [c(1.0, 0.0), c(0.5, 0.5)];
    let cases = [
        RadialSeed::pure(1, a2_one.clone(), &g1),
        RadialSeed::pure(-1, a2_one.clone(), &g1),
        RadialSeed::pure(2, a2_two.clone(), &g2),
        RadialSeed::pure(-2, a2_two.clone(), &g2),
        with_regular(1, &a2_one, &[c(0.7, 0.0)]),
        with_regular(-1, &a2_one, &[c(0.7, 0.0)]),
        with_regular(2, &a2_two, &[c(0.7, 0.0), c(-0.4, 0.2)]),
        with_regular(-2, &a2_two, &[c(0.7, 0.0), c(-0.4, 0.2)]),
    ];
    let mut worst: f64 = 0.0;
    for seed in cases {
        let seed = seed.or_fail("seed")?;
        let predicted = seed.orientation.ok_or("missing orientation")?.kappa(seed.varkappa());
        ensure(predicted == seed.kappa, || format!("table gives {predicted} for kappa {}", seed.kappa))?;
        let node = seed.explicit().or_fail("explicit")?;
        let k = node.kappa_fit().or_fail("fit")?;
        ensure((k - predicted as f64).abs() <= 1e-2, || format!("kappa {}: fitted {k}", seed.kappa))?;
        worst = worst.max((k - predicted as f64).abs());
        let b = node.boundedness(seed.kappa as f64, 1.0).or_fail("boundedness")?;
        let floor = b.decades.last().map(|d| d.lo).unwrap_or(1.0);
        ensure(!b.alarm && floor <= 1e-8 * (1.0 + 1e-9), || format!("kappa {}: alarm on {:?}", seed.kappa, b.decades))?;
    }
    Ok(format!("8 cases, max |fit - kappa| = {worst:.1e}, no growth alarm down to x = 1e-8"))
}

// ------------------------------------------------------------------ 6

fn round_trips() -> Check {
    let mut u = uniform(6);
    let g = grid(0.0, 5.0, 501);
    let mut sa: f64 = 0.0;
    for k in 0..20 {
        let seed = random_pe_seed(1 + k % 4, 1 + k % 2, &mut u).or_fail("PE seed")?;
        let phi = weyl_direct(&seed).or_fail("weyl")?;
        let back = weyl_inverse(&phi.realization).or_fail("inverse")?;
        sa = sa.max(seed.potential(&g).or_fail("v")?.max_dist(&back.potential(&g).or_fail("v")?).or_fail("dist")?);
    }
    ensure(sa <= 1e-6, || format!("(a) self-adjoint potential deviation {sa:.2e}"))?;

    let mut gpe: f64 = 0.0;
    for _ in 0..3 {
        let seed = random_gpe_seed(2, 1, 1, true, &mut u).or_fail("GPE seed")?;
        let sc = gpe_scattering(&seed).or_fail("scattering")?;
        let back = gpe_inverse(&sc.r_l).or_fail("inverse")?;
        let sc2 = gpe_scattering(&back).or_fail("scattering")?;
        for lam in real_samples(20, 2.0) {
            gpe = gpe.max(sc2.r_l.eval(lam).or_fail("R")?.dist(&sc.r_l.eval(lam).or_fail("R")?));
        }
    }
    ensure(gpe <= 1e-8, || format!("(b) reflection deviation {gpe:.2e}"))?;

    let mut skew: f64 = 0.0;
    for k in 0..20 {
        let seed = random_skew_seed(1 + k % 3, 1 + k % 2, &mut u).or_fail("skew seed")?;
        let phi = skew_weyl_direct(&seed).or_fail("weyl")?;
        let back = skew_weyl_inverse(&phi.realization).or_fail("inverse")?;
        skew = skew.max(seed.potential(&g).or_fail("v")?.max_dist(&back.potential(&g).or_fail("v")?).or_fail("dist")?);
    }
    ensure(skew <= 1e-6, || format!("(c) skew potential deviation {skew:.2e}"))?;

    let mut nw: f64 = 0.0;
    let gx = grid2(0.0, 5.0, 51, 0.0, 0.5, 6);
    for k in 0..10u64 {
        let seed = nwave_seed(200 + k, 1 + (k % 3) as usize, vec![1.0, 1.0]);
        let phi = nwave_weyl(&seed, 0.0).or_fail("weyl")?;
        let re = |m: CMat| m.diag().iter().map(|z| z.re).collect::<Vec<_>>();
        let back = nwave_inverse(&phi, re(seed.d()), re(seed.d_hat())).or_fail("inverse")?;
        let (a, b) = (nwave_solution(&seed, &gx).or_fail("xi")?, nwave_solution(&back, &gx).or_fail("xi")?);
        nw = nw.max(a.max_dist(&b).or_fail("dist")?);
    }
    ensure(nw <= 1e-6, || format!("(d) N-wave potential deviation {nw:.2e}"))?;
    Ok(format!("(a) {sa:.1e}, (b) {gpe:.1e}, (c) {skew:.1e}, (d) {nw:.1e}"))
}

// ------------------------------------------------------------------ 7

fn scattering_admissibility() -> Check {
    let mut u = uniform(7);
    let (mut sup, mut tail): (f64, f64) = (0.0, 0.0);
    let mut reflections = Vec::new();
    for k in 0..3 {
        let seed = random_pe_seed(1 + k, 1, &mut u).or_fail("PE seed")?;
        reflections.push(reflection_from_weyl(&weyl_direct(&seed).or_fail("weyl")?).or_fail("reflection")?);
        let definite = k % 2 == 0;
        let seed = random_gpe_seed(2, 1, 1, definite, &mut u).or_fail("GPE seed")?;
        reflections.push(gpe_scattering(&seed).or_fail("scattering")?.r_l);
    }
    for r in &reflections {
        sup = sup.max(max_norm_on_real_axis(r, 100).or_fail("sup")?);
        tail = tail.max(r.eval(c(1e6, 0.0)).or_fail("R")?.max_abs());
    }
    ensure(sup <= 1.0 + 1e-9, || format!("sup |R_L| = {sup}"))?;
    ensure(tail <= 1e-4, || format!("|R_L(1e6)| = {tail:.2e}"))?;
    let mut defect: f64 = 0.0;
    for k in 0..20u64 {
        let m = 2 + (k % 2) as usize;
        let seed = nwave_seed(100 + k, 1 + (k % 3) as usize, vec![1.0; m]);
        defect = defect.max(weyl_defects(&nwave_weyl(&seed, 0.0).or_fail("weyl")?).or_fail("defects")?.max());
    }
    ensure(defect <= 1e-10, || format!("N-wave Weyl defect {defect:.2e}"))?;
    Ok(format!("sup |R_L| = {sup:.6}, |R_L(1e6)| <= {tail:.1e}, N-wave Weyl defects <= {defect:.1e}"))
}

// ------------------------------------------------------------------ 8

fn pde_residuals() -> Check {
    let order = |kind: &PdeKind, g: &GridSpec, make: &dyn Fn(&GridSpec) -> gbdt::Result<SolutionGrid>| {
        let rep = pde_residual_order(kind, &make(g)?, &make(&g.refined())?)?;
        Ok::<f64, gbdt::Error>(rep.order.unwrap_or(f64::NAN))
    };
    let mut rows: Vec<(&str, f64)> = Vec::new();
    let nw = nwave_seed(3, 1, vec![1.0, 1.0, 1.0]);
    let kind = PdeKind::NWave { d: nw.d(), d_hat: nw.d_hat() };
    rows.push(("N-wave", order(&kind, &grid2(-1.0, 1.0, 41, -1.0, 1.0, 41), &|g| nwave_solution(&nw, g)).or_fail("N-wave")?));
    let sol = NlsSeed::new(vec![I], vec![[c(1.0, 0.0), c(1.0, 0.0)]], NlsBackground::Zero).or_fail("NLS seed")?;
    rows.push(("fNLS soliton", order(&PdeKind::Fnls, &grid2(-2.0, 2.0, 41, 0.0, 1.0, 21), &|g| nls_solution(&sol, g)).or_fail("fNLS")?));
    let modn = NlsSeed::n_modulation(&[(5, 4)], vec![[c(1.0, 0.0), c(0.5, 0.2)]]).or_fail("modulation seed")?;
    rows.push((
        "fNLS n-modulation",
        order(&PdeKind::Fnls, &grid2(-2.0, 2.0, 81, 0.0, 2.0, 41), &|g| nls_solution(&modn, g)).or_fail("fNLS")?,
    ));
    let node = chiral_node(40);
    let bg = ChiralBackground::diagonal_exponential(vec![1.0, -0.5], vec![0.3, 0.7]).or_fail("background")?;
    rows.push(("chiral", order(&PdeKind::Chiral, &grid2(0.0, 0.5, 21, 0.0, 0.5, 21), &|g| chiral_transform(&node, &bg, g)).or_fail("chiral")?));
    let sg = two_state(EllipticVariant::SineGordon);
    let bgk = kink();
    rows.push((
        "sine-Gordon",
        order(&PdeKind::SineGordon, &grid2(0.0, 1.0, 21, 0.0, 1.0, 21), &|g| elliptic_transform(&sg, &bgk, g)).or_fail("sG")?,
    ));
    let shg = two_state(EllipticVariant::SinhGordon);
    let zero = ScalarBackground::zero();
    rows.push((
        "sinh-Gordon",
        order(&PdeKind::SinhGordon, &grid2(0.0, 1.0, 21, 0.0, 1.0, 21), &|g| elliptic_transform(&shg, &zero, g)).or_fail("shG")?,
    ));
    let text = rows.iter().map(|(n, o)| format!("{n} {o:.3}")).collect::<Vec<_>>().join(", ");
    ensure(rows.iter().all(|r| second_order(r.1)), || format!("orders {text}"))?;

    let pw = NlsBackground::PlaneWave;
    let mut worst: f64 = 0.0;
    for lam in [c(0.0, -1.25), c(0.4, 0.3), c(-1.1, 2.0), c(0.0, 0.5)] {
        for (x, t) in [(0.0, 0.0), (0.7, -0.4), (-1.3, 2.2)] {
            let (dx, dt) = pw.u_defect(x, t, lam);
            worst = worst.max(dx).max(dt);
        }
    }
    ensure(worst <= 1e-10, || format!("plane-wave background residual {worst:.2e}"))?;
    Ok(format!("orders: {text}; plane-wave residual {worst:.1e}"))
}

// ------------------------------------------------------------------ 9

fn n_modulation() -> Check {
    let seeds = [
        (vec![(5u64, 4u64)], vec![[c(1.0, 0.0), c(0.5, 0.2)]]),
        (vec![(5, 3), (5, 4)], vec![[c(1.0, 0.0), c(0.3, 0.0)], [c(0.2, 0.5), c(1.0, 0.0)]]),
        (
            vec![(5, 3), (5, 4), (13, 12)],
            vec![[c(1.0, 0.0), c(0.3, 0.0)], [c(0.2, 0.5), c(1.0, 0.0)], [c(0.4, -0.1), c(0.6, 0.3)]],
        ),
    ];
    let g = grid2(-2.0, 2.0, 41, 0.0, 2.0, 21);
    let (mut integral, mut period_err): (f64, f64) = (0.0, 0.0);
    let mut min_eig = f64::INFINITY;
    for (pairs, f) in seeds {
        let seed = NlsSeed::n_modulation(&pairs, f).or_fail("seed")?;
        let a = seed.a_matrix();
        for (x, t) in [(0.0, 0.0), (0.5, 1.0)] {
            let pi = seed.pi_at(x, t);
            let pp = &pi * &pi.adjoint();
            let integrand = |th: f64| {
                let l = inverse(&a.shift(c(th.tan(), 0.0))).unwrap();
                (&(&l * &pp) * &l.adjoint()).scale_re(1.0 / (th.cos().powi(2) * 2.0 * PI))
            };
            let eps = 1e-9;
            let s = simpson(integrand, -PI / 2.0 + eps, PI / 2.0 - eps, 20000);
            let want = seed.s_at(x, t);
            integral = integral.max(s.dist(&want) / want.norm_fro());
        }
        ensure(seed.is_positive_class(), || "seed outside the positive class".into())?;
        for x in g.xs() {
            for t in g.ts() {
                min_eig = min_eig.min(min_eigenvalue(&seed.s_at(x, t)).or_fail("eig")?);
            }
        }
        let period = n_modulation_period(&pairs).or_fail("period")?;
        for (x, t) in [(0.0, 0.0), (0.4, 0.3), (-1.0, 1.7)] {
            let d = seed.v_tilde_at(x, t).or_fail("v")? - seed.v_tilde_at(x, t + period).or_fail("v")?;
            period_err = period_err.max(d.norm());
        }
    }
    ensure(integral <= 1e-8, || format!("residue integral deviation {integral:.2e}"))?;
    ensure(min_eig > 0.0, || format!("S not positive: min eigenvalue {min_eig:e}"))?;
    ensure(period_err <= 1e-8, || format!("t-periodicity error {period_err:.2e}"))?;
    Ok(format!("n = 1..3: integral {integral:.1e}, min eig S {min_eig:.2e}, periodicity {period_err:.1e}"))
}

// ----------------------------------------------------------------- 10

fn coefficient_identities() -> Check {
    let mut u = uniform(10);
    let node = random_triangular_node(3, 2, &mut u).or_fail("node")?;
    let q0 = Coefficient::function(|x, _| CMat::from_real(&[&[0.0, x.cos()], &[x.sin(), 0.3]]));
    let q1 = Coefficient::function(|x, _| CMat::from_real(&[&[0.2, x], &[0.0, -0.1]]));
    let q2 = Coefficient::Constant(CMat::from_real_diag(&[1.0, -1.0]).scale(c(0.0, -1.0)));
    let pole = c(3.0, 0.5);
    let coeffs = RationalCoeffs::new(
        2,
        vec![q0, q1, q2],
        vec![PolePart { c: pole, parts: vec![Coefficient::Constant(CMat::identity(2).scale_re(0.1))] }],
    )
    .or_fail("coefficients")?;
    let opts = EvolveOptions { ode: OdeOptions { substeps: 32, halving_tol: None } };
    let st = evolve_with(&coeffs, &node, &grid(0.0, 1.0, 101), opts).or_fail("evolve")?;
    for i in [0, 50, 100] {
        let t = st.transformed_coeffs(&coeffs, i).or_fail("transform")?;
        let orig = coeffs.sample(st.points()[i], 0.0).or_fail("sample")?;
        ensure(t.poly.last() == orig.poly.last(), || format!("top coefficient changed at sample {i}"))?;
    }
    let xy = st.x0_y0_defect().or_fail("X0/Y0")?;
    let rk = st.rk1_defect(pole).or_fail("rk1")?.max(st.rk1_defect(c(0.0, 0.0)).or_fail("rk1")?);
    ensure(xy <= 1e-10, || format!("|X0 - Y0| = {xy:.2e}"))?;
    ensure(rk <= 1e-9, || format!("|(I - X_-1)(I + Y_-1) - I| = {rk:.2e}"))?;
    Ok(format!("top coefficient unchanged, |X0 - Y0| <= {xy:.1e}, |(I - X_-1)(I + Y_-1) - I| <= {rk:.1e}"))
}

// ----------------------------------------------------------------- 11

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(config: &Path, out: &Path, threads: &str) -> Result<i32, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_gbdt"))
        .env("GBDT_THREADS", threads)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .or_fail("spawn")?;
    o.status.code().ok_or_else(|| "terminated by signal".to_string())
}

fn read_pair(out: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let mut meta = out.as_os_str().to_owned();
    meta.push(".meta.json");
    Ok((std::fs::read(out).or_fail("output")?, std::fs::read(meta).or_fail("metadata")?))
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().or_fail("tempdir")?;
    let mut configs: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .or_fail("configs")?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    ensure(!configs.is_empty(), || "no sample configs".into())?;
    for cfg in &configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let mut runs = Vec::new();
        for (k, threads) in ["1", "2"].iter().enumerate() {
            let out = dir.path().join(format!("{stem}.{k}"));
            let code = run_cli(cfg, &out, threads)?;
            ensure(code == 0, || format!("{stem} exited with {code}"))?;
            runs.push(read_pair(&out)?);
        }
        ensure(runs[0] == runs[1], || format!("{stem}: outputs differ between runs"))?;
    }

    // Verify a constructed field with one sample perturbed by 1.
    let base: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs_dir().join("nwave-construct.json")).or_fail("read")?)
            .or_fail("parse")?;
    let mut cfg = base.clone();
    cfg["grid"] = serde_json::json!("0,1,41,0,1,41");
    let cfg_path = dir.path().join("construct.json");
    std::fs::write(&cfg_path, cfg.to_string()).or_fail("write")?;
    let csv = dir.path().join("field.csv");
    ensure(run_cli(&cfg_path, &csv, "1")? == 0, || "construct failed".into())?;
    let mut field = SolutionGrid::from_csv("nwave", &std::fs::read_to_string(&csv).or_fail("read")?).or_fail("csv")?;
    let i = field.index(20, 20);
    field.values_mut()[i][(0, 1)] += c(1.0, 0.0);
    std::fs::write(&csv, field.to_csv()).or_fail("write")?;
    cfg["command"] = serde_json::json!("verify");
    cfg["input"] = serde_json::json!(csv);
    std::fs::write(&cfg_path, cfg.to_string()).or_fail("write")?;
    let report = dir.path().join("report.json");
    let code = run_cli(&cfg_path, &report, "1")?;
    ensure(code == 4, || format!("corrupted verify exited with {code}"))?;
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).or_fail("report")?).or_fail("parse")?;
    let (ix, it) = (&r["deviation"]["ix"], &r["deviation"]["it"]);
    ensure(*ix == 20 && *it == 20, || format!("fault located at ({ix}, {it})"))?;
    Ok(format!("{} configs byte-identical across runs; corrupted verify exits 4 at (ix, it) = (20, 20)", configs.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("S-node algebra", node_algebra),
        ("identity propagation", identity_propagation),
        ("Darboux property", darboux_property),
        ("radial closed forms", radial_closed_forms),
        ("radial sign law", sign_law),
        ("inverse/direct round trips", round_trips),
        ("scattering admissibility", scattering_admissibility),
        ("PDE residuals", pde_residuals),
        ("n-modulation structure", n_modulation),
        ("coefficient identities", coefficient_identities),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
