//! Seeded, thread-count-independent Monte Carlo reduction.
//!
//! Samples are split into fixed-size chunks. Chunk `k` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, and chunk sums are combined
//! in chunk order, so the result is bit-identical for any rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Generator family recorded in reports.
pub const RNG_NAME: &str = "ChaCha8 (seed, stream = task index)";

/// Samples per chunk.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

/// Generator for task `stream` of a run seeded with `seed`.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Running first and second moments of a vector-valued sample.
#[derive(Debug, Clone)]
pub struct Moments {
    pub n: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Moments {
        Moments {
            n: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (k, v) in x.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        for k in 0..self.sum.len() {
            self.sum[k] += o.sum[k];
            self.sum_sq[k] += o.sum_sq[k];
        }
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.n as f64
    }

    pub fn std_error(&self, k: usize) -> f64 {
        let n = self.n as f64;
        let m = self.mean(k);
        let var = (self.sum_sq[k] / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }

    pub fn estimate(&self, k: usize, seed: u64) -> McEstimate {
        McEstimate {
            mean: self.mean(k),
            std_error: self.std_error(k),
            n: self.n,
            seed,
        }
    }
}

/// Moments of `f` over `n` draws; `f` writes `dim` values per draw into its buffer.
pub fn run_moments<F>(n: usize, dim: usize, seed: u64, f: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = task_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut m = Moments::new(dim);
            let mut buf = vec![0.0; dim];
            for _ in 0..len {
                f(&mut rng, &mut buf);
                m.push(&buf);
            }
            m
        })
        .collect();
    let mut total = Moments::new(dim);
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Scalar Monte Carlo mean of `f`.
pub fn estimate<F>(n: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    run_moments(n, 1, seed, |rng, buf| buf[0] = f(rng)).estimate(0, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn uniform_mean() {
        let e = estimate(100_000, 3, |r| r.random::<f64>());
        assert!(e.z_score(0.5) < 4.0);
        assert!((e.std_error - (1.0f64 / 12.0 / 1e5).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn independent_of_pool_size() {
        let f = |r: &mut ChaCha8Rng| r.random::<f64>().powi(3);
        let a = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate(20_000, 9, f));
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate(20_000, 9, f));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
