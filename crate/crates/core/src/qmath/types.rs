use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use super::{eig_hermitian_matrix, hermitian_deviation, C64, CMatrix, TOL_CHANNEL, TOL_CONSTRUCT};
use crate::error::{Error, Result};

/// Pure state over a finite-dimensional Hilbert space.
///
/// Basis ordering is H = 0, V = 1 per qubit, with qubit 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Builds a normalized state from raw amplitudes.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Self { amps: DVector::from_vec(amps) }.normalize()
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn h() -> Self {
        Self::basis(2, 0)
    }

    pub fn v() -> Self {
        Self::basis(2, 1)
    }

    /// (|H⟩ + |V⟩)/√2
    pub fn d() -> Self {
        Self::pair(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0))
    }

    /// (|H⟩ − |V⟩)/√2
    pub fn dbar() -> Self {
        Self::pair(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0))
    }

    /// (|H⟩ + i|V⟩)/√2
    pub fn l() -> Self {
        Self::pair(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2))
    }

    /// (|H⟩ − i|V⟩)/√2
    pub fn r() -> Self {
        Self::pair(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2))
    }

    fn pair(a: C64, b: C64) -> Self {
        Self { amps: DVector::from_vec(vec![a, b]) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        qubit_count(self.dim())
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amps: self.amps.map(|a| a / n) })
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amps * self.amps.adjoint();
        DensityOperator::from_raw(m, self.norm_sqr())
    }

    pub fn apply(&self, op: &Operator) -> Result<StateVector> {
        if op.dim_in() != self.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim_in(), got: self.dim() });
        }
        Self { amps: op.matrix() * &self.amps }.normalize()
    }
}

/// Density operator. Conditional (post-selected) states are allowed to be
/// sub-normalized; their trace is carried in `norm`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    norm: f64,
}

impl DensityOperator {
    /// Validated trace-1 density operator.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self::conditional(matrix)?;
        if (rho.norm - 1.0).abs() > TOL_CONSTRUCT {
            return Err(Error::InvalidTrace(rho.norm));
        }
        Ok(rho)
    }

    /// Validated sub-normalized state; `norm` is the trace.
    pub fn conditional(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > TOL_CONSTRUCT {
            return Err(Error::NotHermitian(dev));
        }
        let matrix = hermitize(&matrix);
        let (vals, _) = eig_hermitian_matrix(&matrix)?;
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -TOL_CHANNEL {
            return Err(Error::NotPositive(min));
        }
        let norm = matrix.trace().re;
        if norm > 1.0 + TOL_CHANNEL {
            return Err(Error::InvalidTrace(norm));
        }
        Ok(Self { matrix, norm })
    }

    /// Skips validation; the caller guarantees Hermitian PSD input.
    pub(crate) fn from_raw(matrix: CMatrix, norm: f64) -> Self {
        Self { matrix: hermitize(&matrix), norm }
    }

    pub(crate) fn from_raw_traced(matrix: CMatrix) -> Self {
        let m = hermitize(&matrix);
        let norm = m.trace().re;
        Self { matrix: m, norm }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_raw(CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0), 1.0)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.to_density()
    }

    /// Convex mixture Σ wᵢ ρᵢ with weights summing to one.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let dim = parts.first().map(|(_, r)| r.dim()).ok_or(Error::ZeroNorm)?;
        let mut m = CMatrix::zeros(dim, dim);
        for (w, r) in parts {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.dim() });
            }
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            m += r.matrix() * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        qubit_count(self.dim())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// Rescales a sub-normalized state to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 1e-300 {
            return Err(Error::ZeroProbability);
        }
        Ok(Self::from_raw(&self.matrix / C64::new(t, 0.0), 1.0))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian_matrix(&self.matrix).map(|(v, _)| v).unwrap_or_default()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Re(tr(ρ O))
    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        if op.dim_in() != self.dim() || op.dim_out() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.dim_in() });
        }
        Ok((&self.matrix * op.matrix()).trace().re)
    }

    /// U ρ U†
    pub fn conjugate(&self, op: &Operator) -> Result<Self> {
        if op.dim_in() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.dim_in() });
        }
        let m = op.matrix() * &self.matrix * op.matrix().adjoint();
        Ok(Self::from_raw_traced(m))
    }

    /// Physical projection: clips negative eigenvalues and renormalizes.
    pub fn project_physical(matrix: &CMatrix) -> Result<Self> {
        let h = hermitize(matrix);
        let (vals, vecs) = eig_hermitian_matrix(&h)?;
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            clipped.len(),
            clipped.iter().map(|&v| C64::new(v / total, 0.0)),
        ));
        Ok(Self::from_raw(&vecs * diag * vecs.adjoint(), 1.0))
    }
}

/// Linear map between Hilbert spaces; `is_unitary` is computed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    is_unitary: bool,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Self {
        let is_unitary = matrix.is_square() && unitary_deviation(&matrix) < TOL_CONSTRUCT;
        Self { matrix, is_unitary }
    }

    /// Fails unless ‖U†U − I‖_max < 1e-12.
    pub fn unitary(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotUnitary(f64::INFINITY));
        }
        let dev = unitary_deviation(&matrix);
        if dev >= TOL_CONSTRUCT {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix, is_unitary: true })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Self::new(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim), is_unitary: true }
    }

    pub fn pauli_x() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self::from_rows(&[&[o, l], &[l, o]])
    }

    pub fn pauli_y() -> Self {
        let (o, i) = (C64::new(0.0, 0.0), C64::new(0.0, 1.0));
        Self::from_rows(&[&[o, -i], &[i, o]])
    }

    pub fn pauli_z() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self::from_rows(&[&[l, o], &[o, -l]])
    }

    /// |ψ⟩⟨ψ|
    pub fn projector(psi: &StateVector) -> Self {
        Self::new(psi.vector() * psi.vector().adjoint())
    }

    /// |a⟩⟨b|
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        Self::new(a.vector() * b.vector().adjoint())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim_in(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_unitary(&self) -> bool {
        self.is_unitary
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), is_unitary: self.is_unitary }
    }

    pub fn compose(&self, after: &Operator) -> Result<Operator> {
        if after.dim_in() != self.dim_out() {
            return Err(Error::DimensionMismatch { expected: self.dim_out(), got: after.dim_in() });
        }
        Ok(Self::new(after.matrix() * &self.matrix))
    }

    /// Lifts an operator on `targets` (in the listed order) to `n_qubits`
    /// qubits, acting as identity on the rest.
    pub fn embed(&self, targets: &[usize], n_qubits: usize) -> Result<Operator> {
        let k = targets.len();
        if self.dim_in() != 1 << k || self.dim_out() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, got: self.dim_in() });
        }
        super::check_indices(targets, n_qubits)?;
        let dim = 1usize << n_qubits;
        let sub = |full: usize| -> usize {
            targets
                .iter()
                .fold(0, |acc, &t| (acc << 1) | ((full >> (n_qubits - 1 - t)) & 1))
        };
        let mask: usize = targets.iter().map(|&t| 1usize << (n_qubits - 1 - t)).sum();
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            if i & !mask != j & !mask {
                C64::new(0.0, 0.0)
            } else {
                self.matrix[(sub(i), sub(j))]
            }
        });
        Ok(Self { matrix: m, is_unitary: self.is_unitary })
    }
}

impl From<CMatrix> for Operator {
    fn from(m: CMatrix) -> Self {
        Self::new(m)
    }
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn unitary_deviation(m: &CMatrix) -> f64 {
    let p = m.adjoint() * m - CMatrix::identity(m.ncols(), m.ncols());
    p.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn qubit_count(dim: usize) -> Option<usize> {
    dim.is_power_of_two().then(|| dim.trailing_zeros() as usize)
}
