//! Seedable, splittable counter-based generator.
//!
//! The stream is fully specified so other implementations can reproduce it:
//!
//! ```text
//! mix(z)  = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB; z ^ (z >> 31)     (wrapping u64)
//! key     = mix(seed ^ mix(stream ^ 0x6A09E667F3BCC909))
//! u64[c]  = mix(key + (c + 1) * 0x9E3779B97F4A7C15)                   (c = 0, 1, 2, ...)
//! uniform = (u64 >> 11) * 2^-53                                      in [0, 1)
//! normal  = sqrt(-2 ln u1) * cos(2 pi u2), u1 = ((u64 >> 11) + 1) * 2^-53, u2 = uniform
//! complex = (sqrt(-2 ln u1) cos(2 pi u2), sqrt(-2 ln u1) sin(2 pi u2)) / sqrt(2)
//! ```
//!
//! Every normal or complex draw consumes exactly two counter values.

use std::f64::consts::TAU;

use num_complex::Complex64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0x6A09_E667_F3BC_C909;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            key: mix(seed ^ mix(stream ^ STREAM_SALT)),
            counter: 0,
        }
    }

    /// Independent generator for a derived stream of the same seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(self.seed ^ mix(self.key), stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (`n > 0`), by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    fn box_muller(&mut self) -> (f64, f64) {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        (r * (TAU * u2).cos(), r * (TAU * u2).sin())
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        self.box_muller().0
    }

    /// Circular complex Gaussian with `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let (a, b) = self.box_muller();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// `k` distinct indices from `0..n`, in increasing order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        // Partial Fisher-Yates.
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut out = pool[..k].to_vec();
        out.sort_unstable();
        out
    }
}
