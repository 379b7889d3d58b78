//! Counter-based Gaussian increments.
//!
//! The pair of normals for blob `i` at step `k` under seed `s` is a pure
//! function of `(s, k, i)`: ChaCha8 keyed by the seed, stream number `k`,
//! word offset `4 i`. Workers can therefore draw any sub-range of blobs in
//! any order and still reproduce the serial stream exactly.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use rayon::prelude::*;

/// 32-bit words consumed per blob (two `u64` draws).
const WORDS_PER_BLOB: u128 = 4;

/// Blobs per independently seeked block.
const BLOCK: usize = 4096;

#[inline]
fn open_unit(bits: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below stays finite
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn half_open_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn fill_block(seed: u64, step: u64, start: usize, out: &mut [[f64; 2]]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng.set_word_pos(start as u128 * WORDS_PER_BLOB);
    for z in out.iter_mut() {
        let u1 = open_unit(rng.next_u64());
        let u2 = half_open_unit(rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        *z = [r * c, r * s];
    }
}

/// Standard normal pairs for blobs `0..out.len()` at the given step.
pub fn gaussian_pairs(seed: u64, step: u64, out: &mut [[f64; 2]]) {
    out.par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| fill_block(seed, step, b * BLOCK, chunk));
}

/// Normal pair for a single blob; identical to the corresponding entry of
/// [`gaussian_pairs`].
pub fn gaussian_pair(seed: u64, step: u64, index: usize) -> [f64; 2] {
    let mut z = [[0.0; 2]; 1];
    fill_block(seed, step, index, &mut z);
    z[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_bulk() {
        let mut bulk = vec![[0.0; 2]; 3 * BLOCK + 17];
        gaussian_pairs(7, 3, &mut bulk);
        for i in [0, 1, BLOCK - 1, BLOCK, 2 * BLOCK + 5, 3 * BLOCK + 16] {
            assert_eq!(gaussian_pair(7, 3, i), bulk[i]);
        }
    }

    #[test]
    fn streams_differ_by_step_and_seed() {
        assert_ne!(gaussian_pair(1, 0, 0), gaussian_pair(1, 1, 0));
        assert_ne!(gaussian_pair(1, 0, 0), gaussian_pair(2, 0, 0));
        assert_ne!(gaussian_pair(1, 0, 0), gaussian_pair(1, 0, 1));
    }

    #[test]
    fn moments_are_standard_normal() {
        let n = 200_000;
        let mut z = vec![[0.0; 2]; n];
        gaussian_pairs(42, 0, &mut z);
        let xs: Vec<f64> = z.iter().flat_map(|p| p.iter().copied()).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        let corr = z.iter().map(|p| p[0] * p[1]).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.01, "{m}");
        assert!((v - 1.0).abs() < 0.01, "{v}");
        assert!(corr.abs() < 0.01, "{corr}");
    }
}
