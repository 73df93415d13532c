//! Counter-based pseudorandom streams.
//!
//! Every draw is a pure function of a 64-bit seed and a short tuple of
//! coordinates, so results never depend on how work is scheduled. The mixing
//! function is the SplitMix64 finalizer, applied once per coordinate.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(seed, coords)` to a 64-bit word.
#[inline]
pub fn draw(seed: u64, coords: &[u64]) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    for (pos, &c) in coords.iter().enumerate() {
        let lane = (pos as u64 + 1).wrapping_mul(GOLDEN);
        h = mix64(h ^ mix64(c.wrapping_add(lane)));
    }
    h
}

/// Maps a word to `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `true` with probability `p` for the draw at `(seed, coords)`.
#[inline]
pub fn bernoulli(seed: u64, coords: &[u64], p: f64) -> bool {
    unit_f64(draw(seed, coords)) < p
}

/// A sequential stream keyed by `(seed, stream id)`; the n-th output is
/// `draw(seed, [stream, n])`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = draw(self.seed, &[self.stream, self.counter]);
        self.counter += 1;
        out
    }

    /// Uniform on the half-open interval `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform on `[lo, hi)`; returns `lo` when the interval is degenerate.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer on the inclusive range `[lo, hi]` (rejection sampling,
    /// no modulo bias).
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi as i128 - lo as i128 + 1) as u128;
        if span > u64::MAX as u128 {
            return self.next_u64() as i64;
        }
        let span = span as u64;
        let zone = u64::MAX - (u64::MAX % span) - 1;
        loop {
            let w = self.next_u64();
            if w <= zone {
                return (lo as i128 + (w % span) as i128) as i64;
            }
        }
    }
}
