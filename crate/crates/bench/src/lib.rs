//! Benchmark helpers: deterministic synthetic inputs shared by the bench targets.
//!
//! Everything here is seeded ChaCha8, so repeated benchmark runs measure the
//! same workload.

use navdrift_core::cluster::Partition;
use rand::Rng;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Axis-aligned centers for `k` components in `dims` dimensions, pairwise at
/// least `separation` apart.
pub fn grid_centers(k: usize, dims: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut center = vec![0.0; dims];
            center[j % dims] = separation * (1 + j / dims) as f64;
            center
        })
        .collect()
}

/// `n` points drawn from an equal-weight isotropic Gaussian mixture over
/// `centers`, with unit spread; returns `(item_ids, points)`.
pub fn gaussian_mixture(n: usize, centers: &[Vec<f64>], seed: u64) -> (Vec<u64>, Vec<Vec<f64>>) {
    let dims = centers[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (1..=n as u64).collect();
    let points = (0..n)
        .map(|_| {
            let center = &centers[rng.gen_range(0..centers.len())];
            (0..dims)
                .map(|d| center[d] + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    (ids, points)
}

/// A partition of `n` items into `k` uniform-random clusters.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (1..=n as u64).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..k)).collect();
    Partition::new(ids, labels, k, 0.0).expect("valid synthetic partition")
}
