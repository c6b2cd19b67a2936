//! Counter-based random streams and deterministic reductions.
//!
//! Every Monte Carlo draw in this crate is keyed by `(seed, domain, sample
//! index, frequency)`, so an ensemble member is identical no matter how work
//! is scheduled across threads. Sums over ensembles and lattices go through
//! [`tree_sum`], a fixed-shape pairwise reduction, which makes floating-point
//! results independent of worker count as well.

use num_complex::Complex64;

/// splitmix64 finaliser; a bijective 64-bit mixer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream domains keep draws from different operations decoupled even when
/// they share a seed and sample index.
pub mod domain {
    pub const FIELD_SAMPLE: u64 = 1;
    pub const TAIL_SAMPLE: u64 = 2;
    pub const RADIUS_CALIBRATION: u64 = 3;
}

/// Counter-based generator: a key derived from `(seed, stream parts)` plus a
/// counter, passed through splitmix64. Cheap to construct per (sample,
/// frequency) pair.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(seed: u64, parts: &[u64]) -> Self {
        let mut key = mix(seed ^ GOLDEN);
        for &p in parts {
            key = mix(key.wrapping_add(GOLDEN).wrapping_add(p.wrapping_mul(0xff51_afd7_ed55_8ccd)));
        }
        CounterRng { key, ctr: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)))
    }

    /// Uniform in the half-open interval (0, 1].
    #[inline]
    pub fn next_uniform_pos(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0); // [0,1)
        1.0 - u
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Pair of independent standard normals (Box-Muller).
    #[inline]
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_uniform_pos();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        (r * th.cos(), r * th.sin())
    }

    /// Complex Gaussian with `E g = 0`, `E |g|^2 = 1` (real and imaginary
    /// parts independent, each of variance 1/2).
    #[inline]
    pub fn next_complex_gaussian(&mut self) -> Complex64 {
        let (a, b) = self.next_normal_pair();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Pairwise tree sum with a shape that depends only on `xs.len()`.
pub fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
        }
    }
}

/// Mean and standard error of the mean via tree sums.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = tree_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = tree_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
