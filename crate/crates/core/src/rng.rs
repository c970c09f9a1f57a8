//! Counter-addressed Gaussian noise.
//!
//! Every Gaussian block is a pure function of `(seed, stream, counter)`: the
//! ChaCha20 keystream selected by `seed` and `stream` is positioned at a word
//! offset derived from `counter`, and consecutive pairs of 64-bit words are
//! turned into pairs of standard normals by the Box–Muller transform. Runs of
//! an ensemble use distinct streams; steps of a run use distinct counters.

use std::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier recorded in run manifests.
pub const GENERATOR_ID: &str = "chacha20/seed_from_u64+stream+word_pos; box-muller";

/// Keystream words consumed by a block of `len` normals.
fn words_per_block(len: usize) -> u128 {
    // two u64 (four 32-bit words) per Box-Muller pair
    4 * len.div_ceil(2) as u128
}

/// Uniform in the open interval (0, 1) from the top 53 bits.
fn open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `len` independent standard normal draws addressed by `(seed, stream, counter)`.
pub fn gaussian_block(seed: u64, stream: u64, counter: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(counter as u128 * words_per_block(len));
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let u1 = open_unit(rng.next_u64());
        let u2 = open_unit(rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        out.push(r * c);
        out.push(r * s);
    }
    out.truncate(len);
    out
}

/// Seed of the `index`-th child of `seed` (SplitMix64 finalizer), for
/// deriving independent base seeds when streams are not enough.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
