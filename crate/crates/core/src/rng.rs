//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! master seed, so the noise sequence never depends on how delays or batches
//! were drawn. Worker `w` owns streams `2w` (Gaussian noise) and `2w + 1`
//! (minibatch selection); worker 0 therefore sees the same streams as the
//! single-threaded simulator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type RngStream = ChaCha8Rng;

const DELAY_STREAM: u64 = u64::MAX;
const AUX_STREAM: u64 = u64::MAX - 1;

pub fn stream(seed: u64, id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn noise_stream(seed: u64, worker: usize) -> RngStream {
    stream(seed, 2 * worker as u64)
}

pub fn batch_stream(seed: u64, worker: usize) -> RngStream {
    stream(seed, 2 * worker as u64 + 1)
}

pub fn delay_stream(seed: u64) -> RngStream {
    stream(seed, DELAY_STREAM)
}

/// Stream for harness-side draws (synthetic data, reference clouds).
pub fn aux_stream(seed: u64) -> RngStream {
    stream(seed, AUX_STREAM)
}

pub fn fill_standard_normal(rng: &mut RngStream, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = StandardNormal.sample(rng);
    }
}

pub fn standard_normal_vec(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut z = vec![0.0; d];
    fill_standard_normal(rng, &mut z);
    z
}
