#![allow(dead_code)]

use gbdt::matcore::C64;
use gbdt::{CMat, GridSpec, SolutionGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform `[-1, 1]` source with a fixed seed.
pub fn uniform(seed: u64) -> impl FnMut() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || rng.gen_range(-1.0..1.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sup-norm distance between two fields, skipping flagged samples.
pub fn sup_dist(a: &SolutionGrid, b: &SolutionGrid) -> f64 {
    a.max_dist(b).unwrap()
}

/// Composite Simpson rule for a matrix integrand on `[a, b]` with `n` (even)
/// panels.
pub fn simpson(f: impl Fn(f64) -> CMat, a: f64, b: f64, n: usize) -> CMat {
    let h = (b - a) / n as f64;
    let mut acc = &f(a) + &f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc = &acc + &f(a + h * i as f64).scale_re(w);
    }
    acc.scale_re(h / 3.0)
}

pub fn grid(x0: f64, x1: f64, nx: usize) -> GridSpec {
    GridSpec::new(x0, x1, nx).unwrap()
}

pub fn spectral_norm(m: &CMat) -> f64 {
    gbdt::matcore::Svd::new(m).unwrap().s.first().copied().unwrap_or(0.0)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
