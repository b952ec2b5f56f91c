//! Counter-based pseudo-random generator for reproducible synthetic data.
//!
//! Output `n` of a stream with key `k` is `mix64(k + (n + 1) * GOLDEN)`, where
//! `mix64` is the SplitMix64 finalizer. Because the state is a plain counter,
//! any draw can be reproduced from `(seed, stream, counter)` alone and streams
//! for different columns never share state.
//!
//! Constants:
//! * `GOLDEN = 0x9E37_79B9_7F4A_7C15` (2^64 / phi)
//! * `mix64`: `z ^= z >> 30; z *= 0xBF58_476D_1CE4_E5B9; z ^= z >> 27;
//!   z *= 0x94D0_49BB_1331_11EB; z ^= z >> 31`
//! * stream key: `mix64(seed ^ mix64(stream + STREAM_SALT))`,
//!   `STREAM_SALT = 0xD1B5_4A32_D192_ED03`
//!
//! Uniform doubles take the top 53 bits and are offset by half an ulp so they
//! lie strictly inside (0, 1). Normals use the Box-Muller transform, consuming
//! two uniforms per pair of variates.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent substream `stream` of `seed`, e.g. one per panel column.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let key = mix64(seed ^ mix64(stream.wrapping_add(STREAM_SALT)));
        Self {
            key,
            counter: 0,
            spare_normal: None,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Multiply-shift keeps the mapping branch-free; the bias is < n / 2^64.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_normal()).collect()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
