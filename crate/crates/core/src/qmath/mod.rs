//! Dense complex linear algebra for few-qubit polarization states.
//!
//! Conventions used everywhere in the crate: H = 0, V = 1 for each qubit,
//! and qubit 0 is the most significant index of a multi-qubit basis ket.
//! Matrices are dense; no protocol state exceeds 32 dimensions.

mod types;
pub mod random;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use types::{DensityOperator, Operator, StateVector};
pub(crate) use types::hermitize;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Tolerance applied when constructing states and operators.
pub const TOL_CONSTRUCT: f64 = 1e-12;
/// Tolerance applied to channel completeness and positivity checks.
pub const TOL_CHANNEL: f64 = 1e-10;

/// Kronecker product with the left operand's indices most significant.
pub trait Tensor<Rhs = Self> {
    type Output;
    fn tensor(&self, rhs: &Rhs) -> Self::Output;
}

impl Tensor for StateVector {
    type Output = StateVector;
    fn tensor(&self, rhs: &StateVector) -> StateVector {
        let v = self.vector().kronecker(rhs.vector());
        StateVector::new(v.iter().copied().collect()).expect("product of normalized states")
    }
}

impl Tensor for DensityOperator {
    type Output = DensityOperator;
    fn tensor(&self, rhs: &DensityOperator) -> DensityOperator {
        DensityOperator::from_raw(self.matrix().kronecker(rhs.matrix()), self.norm() * rhs.norm())
    }
}

impl Tensor for Operator {
    type Output = Operator;
    fn tensor(&self, rhs: &Operator) -> Operator {
        Operator::new(self.matrix().kronecker(rhs.matrix()))
    }
}

/// Free-function form of [`Tensor::tensor`]. Mixing kinds is a type error.
pub fn tensor<T: Tensor>(a: &T, b: &T) -> T::Output {
    a.tensor(b)
}

pub(crate) fn check_indices(indices: &[usize], n_qubits: usize) -> Result<()> {
    for (k, &i) in indices.iter().enumerate() {
        if i >= n_qubits {
            return Err(Error::QubitOutOfRange { index: i, n_qubits });
        }
        if indices[..k].contains(&i) {
            return Err(Error::DuplicateQubit(i));
        }
    }
    Ok(())
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Reduced state on the qubits in `keep`, returned in ascending qubit order.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let n = rho.n_qubits().ok_or(Error::NotQubitDimension(rho.dim()))?;
    check_indices(keep, n)?;
    let m = partial_trace_matrix(rho.matrix(), keep, n);
    Ok(DensityOperator::from_raw(m, rho.norm()))
}

pub(crate) fn partial_trace_matrix(m: &CMatrix, keep: &[usize], n: usize) -> CMatrix {
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let compose = |k_bits: usize, t_bits: usize| -> usize {
        let mut full = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            let bit = (k_bits >> (kept.len() - 1 - pos)) & 1;
            full |= bit << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let bit = (t_bits >> (traced.len() - 1 - pos)) & 1;
            full |= bit << (n - 1 - q);
        }
        full
    };
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    CMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| m[(compose(i, t), compose(j, t))]).sum()
    })
}

/// Σ K ρ K†. Trace-decreasing sets are allowed; the output records its trace
/// (the success probability) in `norm`.
pub fn apply_kraus(rho: &DensityOperator, kraus: &[Operator]) -> Result<DensityOperator> {
    let first = kraus.first().ok_or_else(|| Error::InvalidParameter("empty Kraus set".into()))?;
    let d_out = first.dim_out();
    let mut completeness = CMatrix::zeros(rho.dim(), rho.dim());
    for k in kraus {
        if k.dim_in() != rho.dim() {
            return Err(Error::DimensionMismatch { expected: rho.dim(), got: k.dim_in() });
        }
        if k.dim_out() != d_out {
            return Err(Error::DimensionMismatch { expected: d_out, got: k.dim_out() });
        }
        completeness += k.matrix().adjoint() * k.matrix();
    }
    let excess = CMatrix::identity(rho.dim(), rho.dim()) - completeness;
    let (vals, _) = eig_hermitian_matrix(&hermitize(&excess))?;
    let worst = vals.last().copied().unwrap_or(0.0);
    if worst < -TOL_CHANNEL {
        return Err(Error::KrausCompleteness(-worst));
    }
    let mut out = CMatrix::zeros(d_out, d_out);
    for k in kraus {
        out += k.matrix() * rho.matrix() * k.matrix().adjoint();
    }
    Ok(DensityOperator::from_raw_traced(out))
}

/// ⟨ψ|ρ|ψ⟩
pub fn fidelity_with_pure(rho: &DensityOperator, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: psi.dim() });
    }
    let v = psi.vector();
    Ok((v.adjoint() * rho.matrix() * v)[(0, 0)].re)
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues descending and
/// eigenvectors as matching columns.
pub fn eig_hermitian(m: &Operator) -> Result<(Vec<f64>, CMatrix)> {
    eig_hermitian_matrix(m.matrix())
}

pub(crate) fn eig_hermitian_matrix(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let dev = hermitian_deviation(m);
    if dev > TOL_CHANNEL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// Square root of a positive semidefinite matrix (negative eigenvalues clipped).
pub(crate) fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = eig_hermitian_matrix(m)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// ½‖a − b‖₁
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let (vals, _) = eig_hermitian_matrix(&hermitize(&(a.matrix() - b.matrix())))?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::random::{random_density, random_hermitian, random_pure, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn phi_minus() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    #[test]
    fn tensor_basis_ordering() {
        let hv = StateVector::h().tensor(&StateVector::v());
        assert_eq!(hv.amplitudes(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let i4 = Operator::identity(2).tensor(&Operator::identity(2));
        assert_eq!(i4.matrix(), &CMatrix::identity(4, 4));
    }

    #[test]
    fn tensor_is_associative_for_projectors() {
        let ph = StateVector::h().to_density();
        let pv = StateVector::v().to_density();
        let left = ph.tensor(&pv).tensor(&ph);
        let right = ph.tensor(&pv.tensor(&ph));
        assert_eq!(left.matrix(), right.matrix());
        let mut expected = CMatrix::zeros(8, 8);
        expected[(2, 2)] = c(1.0);
        assert_eq!(left.matrix(), &expected);
    }

    #[test]
    fn partial_trace_examples() {
        let bell = phi_minus().to_density();
        let a = partial_trace(&bell, &[0]).unwrap();
        assert!(max_abs_diff(a.matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-15);

        let hh = StateVector::h().tensor(&StateVector::h()).to_density();
        let b = partial_trace(&hh, &[1]).unwrap();
        assert!(max_abs_diff(b.matrix(), StateVector::h().to_density().matrix()) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_pure(8, &mut rng).to_density();
        for keep in [&[0usize][..], &[1, 2], &[0, 2]] {
            let r = partial_trace(&psi, keep).unwrap();
            assert!((r.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_indices() {
        let bell = phi_minus().to_density();
        assert!(matches!(partial_trace(&bell, &[2]), Err(Error::QubitOutOfRange { .. })));
        assert!(matches!(partial_trace(&bell, &[0, 0]), Err(Error::DuplicateQubit(0))));
    }

    #[test]
    fn partial_trace_recovers_product_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_density(2, &mut rng);
            let b = random_density(4, &mut rng);
            let ab = a.tensor(&b);
            let ra = partial_trace(&ab, &[0]).unwrap();
            let rb = partial_trace(&ab, &[1, 2]).unwrap();
            assert!(max_abs_diff(ra.matrix(), a.matrix()) < 1e-12);
            assert!(max_abs_diff(rb.matrix(), b.matrix()) < 1e-12);
        }
    }

    #[test]
    fn kraus_identity_and_full_dephasing() {
        let d = StateVector::d().to_density();
        let same = apply_kraus(&d, &[Operator::identity(2)]).unwrap();
        assert!(max_abs_diff(same.matrix(), d.matrix()) < 1e-15);

        let kraus = [Operator::projector(&StateVector::h()), Operator::projector(&StateVector::v())];
        let out = apply_kraus(&d, &kraus).unwrap();
        assert!(max_abs_diff(out.matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn kraus_projector_records_norm() {
        // Projector onto |HV⟩, |VH⟩ of the last two qubits of |φ⁻⟩⊗|D⟩.
        let state = phi_minus().tensor(&StateVector::d()).to_density();
        let hv = StateVector::h().tensor(&StateVector::v());
        let vh = StateVector::v().tensor(&StateVector::h());
        let p = Operator::new(Operator::projector(&hv).matrix() + Operator::projector(&vh).matrix());
        let k = p.embed(&[1, 2], 3).unwrap();
        let out = apply_kraus(&state, &[k]).unwrap();
        assert!((out.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kraus_completeness_violation() {
        let d = StateVector::d().to_density();
        let k = Operator::new(CMatrix::identity(2, 2) * c(1.1));
        assert!(matches!(apply_kraus(&d, &[k]), Err(Error::KrausCompleteness(_))));
    }

    #[test]
    fn fidelity_examples() {
        let phi = phi_minus();
        assert!((fidelity_with_pure(&phi.to_density(), &phi).unwrap() - 1.0).abs() < 1e-12);
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(0.5);
        m[(3, 3)] = c(0.5);
        let deph = DensityOperator::new(m).unwrap();
        assert!((fidelity_with_pure(&deph, &phi).unwrap() - 0.5).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(4);
        assert!((fidelity_with_pure(&mixed, &phi).unwrap() - 0.25).abs() < 1e-12);
        assert!(fidelity_with_pure(&mixed, &StateVector::h()).is_err());
    }

    #[test]
    fn eig_examples() {
        let (vals, _) = eig_hermitian(&Operator::pauli_z()).unwrap();
        assert_eq!(vals, vec![1.0, -1.0]);
        let (vals, _) = eig_hermitian(&Operator::identity(4)).unwrap();
        assert_eq!(vals, vec![1.0; 4]);
        assert!(eig_hermitian(&Operator::new(CMatrix::from_fn(2, 2, |i, j| c((i * 2 + j) as f64))))
            .is_err());
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let h = random_hermitian(4, &mut rng);
            let (vals, vecs) = eig_hermitian_matrix(&h).unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let lam = DMatrix::from_diagonal(&DVector::from_iterator(4, vals.iter().map(|&v| c(v))));
            let rec = &vecs * lam * vecs.adjoint();
            assert!(max_abs_diff(&rec, &h) < 1e-9);
        }
    }

    #[test]
    fn operator_unitarity_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(4, &mut rng);
        assert!(u.is_unitary());
        assert!(!Operator::projector(&StateVector::h()).is_unitary());
        assert!(Operator::unitary(Operator::projector(&StateVector::h()).into_matrix()).is_err());
    }

    #[test]
    fn density_validation() {
        let bad = CMatrix::from_fn(2, 2, |i, j| if i == j { c(0.5) } else { C64::new(0.0, 0.3) });
        assert!(matches!(DensityOperator::new(bad), Err(Error::NotHermitian(_))));
        let neg = CMatrix::from_fn(2, 2, |i, j| if i == j { c([1.5, -0.5][i]) } else { c(0.0) });
        assert!(matches!(DensityOperator::new(neg), Err(Error::NotPositive(_))));
        let half = CMatrix::identity(2, 2) * c(0.25);
        assert!(DensityOperator::new(half.clone()).is_err());
        let cond = DensityOperator::conditional(half).unwrap();
        assert!((cond.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn embed_matches_kronecker() {
        let x = Operator::pauli_x();
        let z = Operator::pauli_z();
        let full = x.embed(&[1], 3).unwrap();
        let kron = Operator::identity(2).tensor(&x).tensor(&Operator::identity(2));
        assert!(max_abs_diff(full.matrix(), kron.matrix()) < 1e-15);
        // Reversed target order swaps the factors.
        let xz = x.tensor(&z).embed(&[2, 0], 3).unwrap();
        let expect = z.tensor(&Operator::identity(2)).tensor(&x);
        assert!(max_abs_diff(xz.matrix(), expect.matrix()) < 1e-15);
    }

    #[test]
    fn complete_channels_preserve_trace_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let rho = random_density(4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let p: f64 = 0.3;
            let kraus = [
                Operator::new(u.matrix() * c(p.sqrt())),
                Operator::new(CMatrix::identity(4, 4) * c((1.0 - p).sqrt())),
            ];
            let out = apply_kraus(&rho, &kraus).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-10);
            assert!(out.min_eigenvalue() > -1e-10);
        }
    }
}
