//! Random states and operators for sweeps and property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, DensityOperator, Operator, StateVector, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let g = ginibre(dim, 1, rng);
    StateVector::new(g.iter().copied().collect()).expect("gaussian vector is nonzero")
}

/// Haar-random unitary (QR of a Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let qr = ginibre(dim, dim, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            d / d.norm()
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Operator::new(q * phases)
}

/// Full-rank random density operator (Hilbert-Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(dim, dim, rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityOperator::from_raw(m / t, 1.0)
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Random mixture of product states; always separable.
pub fn random_separable<R: Rng + ?Sized>(terms: usize, rng: &mut R) -> DensityOperator {
    let weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut m = CMatrix::zeros(4, 4);
    for w in weights {
        let a = random_pure(2, rng);
        let b = random_pure(2, rng);
        let v = a.vector().kronecker(b.vector());
        m += (&v * v.adjoint()) * C64::new(w / total, 0.0);
    }
    DensityOperator::from_raw(m, 1.0)
}
