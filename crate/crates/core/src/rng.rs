//! Portable seeded pseudorandom generator.
//!
//! The generator is xoshiro256++ (Blackman & Vigna). A 64-bit seed is expanded
//! into the 256-bit state with SplitMix64, so `Rng::new(s)` produces the same
//! stream on every platform and build.
//!
//! Derived draws:
//! - `uniform()`: `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`.
//! - `normal()`: Box–Muller with `u1 = 1 - uniform()` (in `(0, 1]`) and
//!   `u2 = uniform()`, returning `sqrt(-2 ln u1) * cos(2 pi u2)`. Each call
//!   consumes exactly two `u64` draws; the sine branch is discarded.
//! - `below(n)`: Lemire's multiply-shift with rejection, unbiased on `[0, n)`.

/// Sub-stream labels used by the training loops.
pub const STREAM_PARAMS: u64 = 1;
pub const STREAM_TOPOLOGY: u64 = 2;
pub const STREAM_EPISODES: u64 = 3;
pub const STREAM_POLICY: u64 = 4;
pub const STREAM_EVAL: u64 = 5;
pub const STREAM_CALIBRATION: u64 = 6;

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream label into an independent child seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut s = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { seed, s }
    }

    /// Independent generator for a labelled sub-stream of `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(derive_seed(seed, stream))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// In-place Fisher–Yates shuffle (swaps from the back).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `k` distinct elements of `pool`, in draw order (partial Fisher–Yates).
    pub fn sample_without_replacement<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        let mut pool = pool.to_vec();
        let k = k.min(pool.len());
        for i in 0..k {
            let j = i + self.below((pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent Python implementation of SplitMix64 seeding
    // and xoshiro256++ (tests/oracles/rng_oracle.py).
    const SEED42_FIRST: [u64; 4] = [
        0xd076_4d4f_4476_689f,
        0x519e_4174_576f_3791,
        0xfbe0_7cfb_0c24_ed8c,
        0xb37d_9f60_0cd8_35b8,
    ];
    const ORACLE_SEED42_CHECKSUM: u64 = 0x757c_9b27_2ae6_d013;

    #[test]
    fn seed42_stream_matches_oracle() {
        let mut r = Rng::new(42);
        for &v in SEED42_FIRST.iter() {
            assert_eq!(r.next_u64(), v);
        }
    }

    #[test]
    fn seed42_thousand_draws_checksum() {
        let mut r = Rng::new(42);
        let mut acc = 0u64;
        for _ in 0..1000 {
            acc = acc.rotate_left(5) ^ r.next_u64();
        }
        assert_eq!(acc, ORACLE_SEED42_CHECKSUM);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Rng::new(7);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut r = Rng::new(3);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = r.below(7) as usize;
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn normal_moments() {
        let mut r = Rng::new(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn sample_without_replacement_is_distinct() {
        let mut r = Rng::new(5);
        let pool: Vec<usize> = (0..20).collect();
        let s = r.sample_without_replacement(&pool, 12);
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 12);
    }
}
