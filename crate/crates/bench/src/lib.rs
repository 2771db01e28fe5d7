//! Seeded inputs shared by the benchmarks.

use cad_core::interval::TrialMatrix;
use cad_core::tree::{allocate_alpha_uniform, build_complete_tree, AlphaAllocation, TestTree};
use cad_core::wavelet::blocks;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const SEED: u64 = 7;

/// Complete `b`-ary tree of the given depth with its uniform allocation.
pub fn tree(b: usize, depth: usize, alpha: f64) -> (TestTree, AlphaAllocation) {
    let t = build_complete_tree(&vec![b; depth], depth).expect("valid shape");
    let a = allocate_alpha_uniform(&t, alpha).expect("valid level");
    (t, a)
}

/// p-values that are tiny with probability `signal` and uniform otherwise.
pub fn pvalues(n: usize, signal: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..n)
        .map(|_| {
            if rng.random_bool(signal) {
                rng.random::<f64>() * 1e-8
            } else {
                rng.random()
            }
        })
        .collect()
}

pub fn noisy_blocks(n: usize, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    blocks(n, 8.0 * sigma)
        .into_iter()
        .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn trials(r: usize, len: usize) -> TrialMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mean = vec![0.0; len];
    let w = len / 32;
    mean[13 * w..14 * w].iter_mut().for_each(|m| *m = 1.0);
    TrialMatrix::synthetic(r, &mean, 1.0, &mut rng).expect("valid trials")
}
