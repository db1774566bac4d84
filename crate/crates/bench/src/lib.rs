//! Seeded inputs shared by the benchmarks.

use mcm_core::polyring::{Arity, Monomial, MultiPoly, PrimeField};
use mcm_core::{build_schedule, McmConfig, McmSchedule, ScheduleMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MERSENNE31: u64 = 2_147_483_647;

/// Dense-ish random homogeneous polynomial of degree `deg` in `n` variables.
pub fn random_homogeneous(f: PrimeField, n: usize, deg: u32, terms: usize, seed: u64) -> MultiPoly<PrimeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elems = (0..terms).map(|_| {
        let mut e = vec![0u32; n];
        for _ in 0..deg {
            e[rng.random_range(0..n)] += 1;
        }
        (Monomial(e), rng.random_range(1..f.q()))
    });
    MultiPoly::from_terms(f, Arity::plain(n), elems)
}

pub fn random_matrix(f: PrimeField, rows: usize, cols: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..f.q())).collect()).collect()
}

pub fn tight(nn: usize, c: usize, r: usize) -> McmSchedule {
    build_schedule(&McmConfig::uniform(nn, c, r, 1, 1).expect("valid config"), ScheduleMode::Tight).expect("tight schedule")
}
