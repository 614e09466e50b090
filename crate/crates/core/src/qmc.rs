//! Seeded low-discrepancy point sets.
//!
//! A Halton sequence with a Cranley–Patterson rotation drawn from the seed.
//! Every point is addressable by index, so parallel sampling loops produce the
//! same points regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::linalg::Vector;

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

const UNIT_CLAMP: f64 = 1e-12;

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Rotated Halton points in `[0,1)^dim`.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    seed: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { shift, seed }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Point number `index` (0-based). Dimensions beyond the prime table fall
    /// back to a per-index pseudo-random stream.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let i = index + 1;
        let mut fallback: Option<ChaCha8Rng> = None;
        self.shift
            .iter()
            .enumerate()
            .map(|(d, s)| {
                let raw = match PRIMES.get(d) {
                    Some(&p) => radical_inverse(i, p),
                    None => fallback
                        .get_or_insert_with(|| {
                            ChaCha8Rng::seed_from_u64(
                                self.seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                            )
                        })
                        .random::<f64>(),
                };
                let u = (raw + s).fract();
                u.clamp(UNIT_CLAMP, 1.0 - UNIT_CLAMP)
            })
            .collect()
    }
}

/// Quasi-uniform points in the ball `B_r ⊂ R^n`.
#[derive(Debug, Clone)]
pub struct BallSampler {
    n: usize,
    halton: Halton,
    normal: Normal,
}

impl BallSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            halton: Halton::new(n + 1, seed),
            normal: Normal::standard(),
        }
    }

    fn gaussian_direction(&self, u: &[f64]) -> Vector {
        let g = Vector::from_iterator(
            self.n,
            u[..self.n].iter().map(|&p| self.normal.inverse_cdf(p)),
        );
        let norm = g.norm();
        if norm > 0.0 {
            g / norm
        } else {
            let mut e = Vector::zeros(self.n);
            e[0] = 1.0;
            e
        }
    }

    /// Point `index` uniformly distributed in `B_r`.
    pub fn ball(&self, index: u64, r: f64) -> Vector {
        let u = self.halton.point(index);
        let radius = r * u[self.n].powf(1.0 / self.n as f64);
        self.gaussian_direction(&u) * radius
    }

    /// Point `index` uniformly distributed on `S_r`.
    pub fn sphere(&self, index: u64, r: f64) -> Vector {
        let u = self.halton.point(index);
        self.gaussian_direction(&u) * r
    }

    /// A radius in `[lo, hi]` spaced log-uniformly, from the last coordinate.
    pub fn log_radius(&self, index: u64, lo: f64, hi: f64) -> f64 {
        let t = self.halton.point(index)[self.n];
        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
    }
}
