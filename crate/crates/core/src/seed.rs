//! Seed derivation and portable Gaussian sampling.
//!
//! Every Monte Carlo stream is a `ChaCha8Rng` seeded with a 64-bit value.
//! Child seeds are derived from a parent seed and a path of integer tags:
//!
//! ```text
//! child = splitmix64(parent ^ splitmix64(tag_0 ^ splitmix64(tag_1 ^ ...)))
//! ```
//!
//! folded left to right, so `derive(s, &[a, b]) == derive(derive(s, &[a]), &[b])`.
//! Results therefore depend only on the tag path, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` along `path`.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(parent, |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviates by the Marsaglia polar method.
///
/// Only IEEE-exact arithmetic plus `libm::log` is involved, so a given seed
/// yields the same stream on every platform.
pub struct GaussianStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> GaussianStream<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * libm::log(s) / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn into_inner(self) -> R {
        self.rng
    }
}
