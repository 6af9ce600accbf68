use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// An `n × d` Latin hypercube design of uniforms in `(0, 1)`, row-major.
///
/// Each column holds exactly one value in every stratum `[k/n, (k+1)/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LhsMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl LhsMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.d).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }
}

/// Draws a seeded Latin hypercube sample.
///
/// Column `j` is filled from its own permutation of the strata with a
/// uniform offset inside each stratum; the generator is ChaCha8, so the
/// result is identical across platforms for a given seed.
pub fn lhs_sample(n: usize, d: usize, seed: u64) -> Result<LhsMatrix> {
    if n == 0 || d == 0 {
        return Err(invalid(format!("latin hypercube needs n ≥ 1 and d ≥ 1, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * d];
    let mut strata: Vec<usize> = (0..n).collect();
    let width = 1.0 / n as f64;
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, &k) in strata.iter().enumerate() {
            let offset: f64 = rng.sample(Open01);
            let lo = k as f64 * width;
            let upper = ((k + 1) as f64 * width).min(1.0);
            let mut v = lo + offset * width;
            // rounding must not carry a draw into the next stratum or onto 0
            if v >= upper {
                v = upper.next_down();
            }
            if v <= 0.0 {
                v = f64::MIN_POSITIVE;
            }
            values[i * d + j] = v;
        }
    }
    Ok(LhsMatrix { n, d, values })
}

/// Derives an independent seed for a named stream from a base seed.
pub fn substream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
