use crate::error::Result;
use crate::qmath::{eig_hermitian_matrix, hermitize, sqrt_psd, DensityOperator, Operator, Tensor};

use super::require_two_qubits;

/// Wootters concurrence, from the spectrum of √ρ ρ̃ √ρ (same as ρ ρ̃).
pub fn concurrence(rho: &DensityOperator) -> Result<f64> {
    require_two_qubits(rho.dim())?;
    let rho = rho.normalized()?;
    let yy = Operator::pauli_y().tensor(&Operator::pauli_y()).into_matrix();
    let flipped = &yy * rho.matrix().conjugate() * &yy;
    let root = sqrt_psd(rho.matrix())?;
    let (eig, _) = eig_hermitian_matrix(&hermitize(&(&root * flipped * &root)))?;
    let l: Vec<f64> = eig.iter().map(|e| e.max(0.0).sqrt()).collect();
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

/// −x log₂x − (1−x) log₂(1−x), zero at both ends.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

pub fn entanglement_of_formation(rho: &DensityOperator) -> Result<f64> {
    let c = concurrence(rho)?;
    Ok(binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0))
}
