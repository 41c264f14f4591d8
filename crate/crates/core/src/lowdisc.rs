//! Randomly shifted Halton sequence.
//!
//! The shift is a Cranley–Patterson rotation drawn from a seeded ChaCha
//! stream, so a `(dim, seed)` pair always yields the same sequence and the
//! first `m` points of a longer request are exactly the `m`-point request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    /// # Panics
    /// If `dim` exceeds the number of tabulated prime bases (32).
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sequence supports at most {} dimensions",
            PRIMES.len()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Halton { shift, index: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, base)| {
                let v = radical_inverse(i, base) + s;
                v - v.floor()
            })
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    acc
}
