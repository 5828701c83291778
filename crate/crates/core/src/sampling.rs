//! Low-discrepancy sampling for hypothesis and margin checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence with a seeded Cranley–Patterson rotation, points in [0,1)^dim.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
        let shift = if seed == 0 {
            vec![0.0; dim]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim).map(|_| rng.random::<f64>()).collect()
        };
        Self { dim, shift, index: 0 }
    }

    pub fn next_point(&mut self, out: &mut [f64]) {
        self.index += 1;
        for d in 0..self.dim {
            let v = radical_inverse(self.index, PRIMES[d]) + self.shift[d];
            out[d] = v - v.floor();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unshifted_base_two_prefix() {
        let mut h = Halton::new(1, 0);
        let mut p = [0.0];
        let mut got = vec![];
        for _ in 0..4 {
            h.next_point(&mut p);
            got.push(p[0]);
        }
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn mean_is_close_to_half() {
        let mut h = Halton::new(5, 42);
        let mut p = [0.0; 5];
        let mut sum = [0.0; 5];
        for _ in 0..4096 {
            h.next_point(&mut p);
            for d in 0..5 {
                assert!((0.0..1.0).contains(&p[d]));
                sum[d] += p[d];
            }
        }
        for s in sum {
            assert!((s / 4096.0 - 0.5).abs() < 0.01);
        }
    }
}
