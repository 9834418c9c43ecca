//! Seeded random streams.
//!
//! Every randomized operation draws from ChaCha8 streams derived from a
//! master seed:
//!
//! * `stream_rng(seed, stream)` is `ChaCha8Rng::seed_from_u64(seed)` with its
//!   stream word set to `stream`. Class-balanced sampling uses the class id
//!   as the stream; bootstrap repeats use the repeat index; uniform sampling
//!   and one-node-per-graph selection use stream 0.
//! * A uniform index in `[0, n)` is `(next_u64() * n) >> 64` computed in
//!   128-bit arithmetic (one draw, no rejection).
//! * Sampling `k` of `n` items without replacement is a partial
//!   Fisher-Yates shuffle of `0..n`: for `i` in `0..k`, swap position `i`
//!   with `i + uniform_index(n - i)`; the first `k` positions are the
//!   sample, in draw order.
//!
//! These rules are platform independent and small enough to reimplement
//! in other languages bit for bit.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform index in `0..n`. `n` must be positive.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// `k` distinct indices from `0..n` in draw order.
pub fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} of {n} without replacement");
    if k.saturating_mul(4) < n {
        sparse_fisher_yates(rng, n, k)
    } else {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + uniform_index(rng, n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

// Same draws as the dense shuffle, but only displaced slots are stored.
fn sparse_fisher_yates(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = i + uniform_index(rng, n - i);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_i = *displaced.get(&i).unwrap_or(&i);
        displaced.insert(j, at_i);
        out.push(at_j);
    }
    out
}
