//! Deterministic parallel sampling: work is cut into fixed-size chunks,
//! chunk `i` draws from stream `i` of a ChaCha generator keyed by the master
//! seed, and per-chunk results are merged in chunk order. Output therefore
//! depends only on `(seed, n)`, never on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub const CHUNK: usize = 10_000;

pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `f(rng, first_index, count)` on every chunk of `0..n` and returns
/// the results in chunk order.
pub fn run_chunks<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let count = CHUNK.min(n - start);
            let mut rng = chunk_rng(seed, c as u64);
            f(&mut rng, start, count)
        })
        .collect()
}

pub fn fill_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Running first and second moments, merged in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// 95% normal-approximation half-width of the mean.
    pub fn ci_half_width(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        Z95 * (self.variance() / self.n as f64).sqrt()
    }
}

pub const Z95: f64 = 1.959963984540054;
