//! Random stream derivation.
//!
//! Every run derives its randomness from one 64-bit master seed. A repetition
//! seed is obtained by passing `(master, repetition)` through SplitMix64, and
//! each consumer (the environment, every user) then owns a ChaCha8 generator
//! keyed by the repetition seed with its own 64-bit stream id. ChaCha8 output
//! is specified bit-for-bit, so traces are reproducible across platforms and
//! independent of the order in which repetitions are executed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator type used for every stream in the simulator.
pub type StreamRng = ChaCha8Rng;

/// Stream id reserved for the environment's reward draws.
pub const ENV_STREAM: u64 = 0;

/// Stream id owned by the policy of `user`.
pub fn user_stream(user: usize) -> u64 {
    1 + user as u64
}

/// One SplitMix64 output step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repetition `rep` under `master`.
pub fn repetition_seed(master: u64, rep: u64) -> u64 {
    splitmix64(master ^ splitmix64(rep))
}

/// Independent generator for `stream_id` under `seed`.
pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Uniform pick from `items`. Consumes no randomness when there is at most
/// one candidate, so tie-breaking does not perturb the stream otherwise.
pub fn choose_uniform<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0]),
        n => Some(items[rng.random_range(0..n)]),
    }
}

/// Bernoulli trial with success probability `p`.
pub fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}
