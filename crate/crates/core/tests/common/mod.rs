#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlbt::linalg::norm2;
use tlbt::{BalancingResult, LinearModel, Matrix, ReducedModel, StateSpaceSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `K - (||K||_2 + 0.5) I` is Hurwitz for any `K`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> StateSpaceSystem {
    let k = uniform(rng, n, n);
    let a = &k - Matrix::identity(n, n) * (norm2(&k) + 0.5);
    let b = uniform(rng, n, m);
    let c = uniform(rng, p, n);
    StateSpaceSystem::new("random", a, b, c, None).unwrap()
}

/// Well-conditioned random transform `I + 0.5 K / ||K||_2`.
pub fn random_transform(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let k = uniform(rng, n, n);
    let scale = 0.5 / norm2(&k);
    Matrix::identity(n, n) + k * scale
}

/// `(W^T A V, W^T B, C V)` using every column of the projections.
pub fn projected(sys: &StateSpaceSystem, bal: &BalancingResult) -> ReducedModel {
    let wt = bal.w.transpose();
    ReducedModel {
        a11: &wt * sys.a() * &bal.v,
        b1: &wt * sys.b(),
        c1: sys.c() * &bal.v,
        r: bal.v.ncols(),
        horizon: bal.horizon,
        parent_name: sys.name.clone(),
    }
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm()
}
