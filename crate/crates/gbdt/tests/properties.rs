mod common;

use common::{c, uniform};
use gbdt::matcore::{solve_sylvester, C64};
use gbdt::radial::Orientation;
use gbdt::samples::{random_cmat, random_triangular_node};
use gbdt::{CMat, GridSpec, SNode, SolutionGrid};
use proptest::prelude::*;

fn node(seed: u64, n: usize, m: usize) -> SNode {
    random_triangular_node(n, m, &mut uniform(seed)).unwrap()
}

fn lambda() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -0.5..0.5f64).prop_map(|(re, im)| c(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_times_inverse_is_identity(seed in any::<u64>(), n in 1usize..=6, m in 1usize..=4, lam in lambda()) {
        let node = node(seed, n, m);
        let w = node.transfer_eval(lam).unwrap();
        let wi = node.transfer_inverse_eval(lam).unwrap();
        prop_assert!((&w * &wi).dist(&CMat::identity(m)) <= 1e-10);
    }

    #[test]
    fn factorize_then_compose_reproduces_transfer(
        seed in any::<u64>(), n in 1usize..=6, m in 1usize..=4, split in 0usize..=6, lam in lambda()
    ) {
        let node = node(seed, n, m);
        let (f1, f2) = node.factorize(split.min(n)).unwrap();
        let w = node.transfer_eval(lam).unwrap();
        let product = &f2.transfer_eval(lam).unwrap() * &f1.transfer_eval(lam).unwrap();
        prop_assert!(product.dist(&w) <= 1e-9 * (1.0 + w.norm_fro()));
        if f1.n() > 0 && f2.n() > 0 {
            let joined = SNode::compose(&f1, &f2).unwrap();
            prop_assert!(joined.transfer_eval(lam).unwrap().dist(&w) <= 1e-9 * (1.0 + w.norm_fro()));
        }
    }

    #[test]
    fn sylvester_solution_satisfies_equation(seed in any::<u64>(), n in 1usize..=5, k in 1usize..=3) {
        let mut u = uniform(seed);
        let mut a = random_cmat(n, n, &mut u);
        let mut b = random_cmat(k, k, &mut u);
        for i in 0..n {
            a[(i, i)] += c(0.0, 3.0);
        }
        for i in 0..k {
            b[(i, i)] -= c(0.0, 3.0);
        }
        let rhs = random_cmat(n, k, &mut u);
        let x = solve_sylvester(&a, &b, &rhs).unwrap();
        prop_assert!((&(&a * &x) - &(&x * &b)).dist(&rhs) <= 1e-12 * (1.0 + rhs.norm_fro()));
    }

    #[test]
    fn node_json_round_trip(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        let node = node(seed, n, m);
        prop_assert_eq!(SNode::from_json(&node.to_json()).unwrap(), node);
    }

    #[test]
    fn grid_text_round_trip(x0 in -10.0..10.0f64, len in 0.01..10.0f64, nx in 2usize..500, t in proptest::option::of((-5.0..5.0f64, 0.01..5.0f64, 2usize..50))) {
        let g = match t {
            Some((t0, tl, nt)) => GridSpec::new_2d(x0, x0 + len, nx, t0, t0 + tl, nt).unwrap(),
            None => GridSpec::new(x0, x0 + len, nx).unwrap(),
        };
        prop_assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), rows in 1usize..=3, cols in 1usize..=3, nx in 2usize..8, nt in 2usize..5) {
        let mut u = uniform(seed);
        let g = GridSpec::new_2d(-1.0, 2.0, nx, 0.0, 1.0, nt).unwrap();
        let values = (0..nx * nt).map(|_| random_cmat(rows, cols, &mut u)).collect();
        let mut field = SolutionGrid::new("test", g, values).unwrap();
        field.flag(nx * nt / 2);
        let back = SolutionGrid::from_csv("test", &field.to_csv()).unwrap();
        prop_assert_eq!(back.to_csv(), field.to_csv());
        prop_assert_eq!(back.max_dist(&field).unwrap(), 0.0);
    }

    #[test]
    fn orientation_reproduces_kappa(kappa in -12i64..=12) {
        prop_assume!(kappa != 0);
        let o = Orientation::for_kappa(kappa).unwrap();
        prop_assert_eq!(o.kappa(kappa.unsigned_abs() as usize), kappa);
        let other = if o == Orientation::First { Orientation::Second } else { Orientation::First };
        prop_assert_eq!(other.kappa(kappa.unsigned_abs() as usize), -kappa);
    }
}
