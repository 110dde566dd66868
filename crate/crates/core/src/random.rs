//! Seeded random states, predicates and unitaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Operator, Predicate, C64};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut TestRng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre(dim: usize, rng: &mut TestRng) -> Operator {
    let entries = (0..dim * dim).map(|_| gaussian(rng)).collect();
    Operator::from_entries(dim, entries).expect("finite samples")
}

/// Random pure state vector of unit norm.
pub fn pure_state(dim: usize, rng: &mut TestRng) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Density operator `GG†/tr(GG†)`.
pub fn gen_density(dim: usize, rng: &mut TestRng) -> Operator {
    let g = ginibre(dim, rng);
    let m = &g * &g.adjoint();
    let t = m.trace().re;
    m.scale_real(1.0 / t).hermitian_part()
}

/// Partial density operator with trace uniform in `(0, 1]`.
pub fn gen_partial_density(dim: usize, rng: &mut TestRng) -> Operator {
    let t: f64 = 1.0 - rng.random::<f64>();
    gen_density(dim, rng).scale_real(t)
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn gen_unitary(dim: usize, rng: &mut TestRng) -> Operator {
    let qr = ginibre(dim, rng).to_nalgebra().qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Operator::from_nalgebra(&q)
}

/// Predicate `U diag(λ) U†` with `λᵢ` uniform in `[0, 1]`.
pub fn gen_predicate(dim: usize, rng: &mut TestRng) -> Predicate {
    let u = gen_unitary(dim, rng);
    let lambda: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let p = (&(&u * &Operator::diagonal(&lambda)) * &u.adjoint()).hermitian_part();
    Predicate::new(p).expect("spectrum in [0, 1]")
}

/// Rank-`rank` orthogonal projector onto a random subspace.
pub fn gen_projector(dim: usize, rank: usize, rng: &mut TestRng) -> Operator {
    let u = gen_unitary(dim, rng);
    let diag: Vec<f64> = (0..dim).map(|i| if i < rank { 1.0 } else { 0.0 }).collect();
    (&(&u * &Operator::diagonal(&diag)) * &u.adjoint()).hermitian_part()
}
