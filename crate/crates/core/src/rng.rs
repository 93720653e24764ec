//! Seeded, portable pseudo-randomness.
//!
//! Every stochastic step (label draws, dataset indices, crop positions,
//! spread noise, weight init) pulls from an [`RngStream`]. The generator is
//! xoshiro256** seeded through SplitMix64, uniforms take the top 53 bits of
//! each output, and normals come from Box-Muller on that uniform stream, so a
//! sequence can be reproduced by any implementation of those three pieces.
//!
//! Streams are not shared between workers. Independent streams are derived
//! from `(seed, stream_index)` with [`RngStream::derive`], or from a
//! component name with [`RngStream::for_component`].

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// Identifier written into manifests so outputs record how they were drawn.
pub const ALGORITHM_ID: &str = "xoshiro256starstar+splitmix64-seed/u53-uniform/box-muller-normal";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed and a stream index into the seed of a sub-stream.
pub fn sub_seed(seed: u64, stream_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream_index.wrapping_mul(GOLDEN_GAMMA)))
}

/// 64-bit FNV-1a hash, used to turn component names into stream indices.
pub fn fnv1a64(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: Xoshiro256StarStar,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream number `stream_index` under `seed`.
    pub fn derive(seed: u64, stream_index: u64) -> Self {
        Self::new(sub_seed(seed, stream_index))
    }

    /// Stream for a named pipeline component (`"train/init"`, `"base"`, ...).
    pub fn for_component(seed: u64, name: &str) -> Self {
        Self::derive(seed, fnv1a64(name))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` by rejection, free of modulo bias.
    ///
    /// Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// True with probability `p` (`p >= 1` always true, `p <= 0` never).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw via Box-Muller; the second variate of each pair
    /// is cached and returned by the next call.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}

pub fn seeded_rng(seed: u64) -> RngStream {
    RngStream::new(seed)
}

/// `n` i.i.d. standard-normal variates.
pub fn gaussian_draw(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}
