//! Seeded random operators and states for property tests and demos.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{DensityState, Ket, Operator, C64};

/// Deterministic generator used across the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let m = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    Operator::from_matrix(m).expect("square")
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase fix).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let qr = ginibre(dim, rng).into_matrix().qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    Operator::from_matrix(q).expect("square")
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    ginibre(dim, rng).hermitian_part()
}

/// Random complex matrix with its trace removed.
pub fn random_traceless<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let g = ginibre(dim, rng);
    let shift = g.trace() / C64::new(dim as f64, 0.0);
    &g - &Operator::identity(dim).scale(shift)
}

pub fn random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Ket {
    let v = Ket::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Full-rank mixed state `G G† / Tr(G G†)` from a Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> DensityState {
    let d: usize = dims.iter().product();
    let g = ginibre(d, rng);
    let p = &g * &g.adjoint();
    let tr = p.trace().re;
    DensityState::trusted(p.scale_real(1.0 / tr), dims.to_vec())
}

pub fn random_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> DensityState {
    let d: usize = dims.iter().product();
    DensityState::trusted(Operator::projector(&random_ket(d, rng)), dims.to_vec())
}
