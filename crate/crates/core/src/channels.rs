//! Collective and partially correlated dephasing of polarization qubits.
//!
//! A photon in basis state |b₁⟩ picks up a random phase relative to |b₀⟩.
//! Photons crossing the channel together share a common phase φ; the first
//! photon of an ordered pair may additionally carry a relative jitter δ.
//! All maps are evaluated analytically: the (i, j) element of ρ is multiplied
//! by the characteristic function E[exp(i Σₚ mₚ φₚ)], mₚ = bitₚ(i) − bitₚ(j).

use nalgebra::Matrix2;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::qmath::{check_indices, DensityOperator, Operator, C64, CMatrix, TOL_CONSTRUCT};

/// Distribution of the common channel phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseDistribution {
    /// Uniform over [0, 2π): complete dephasing.
    #[default]
    Uniform,
    /// Normal(mean_phase, per_photon_sigma²).
    Gaussian,
}

/// Orthonormal single-qubit pair {|b₀⟩, |b₁⟩} in which the channel dephases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingBasis {
    zero: [C64; 2],
    one: [C64; 2],
}

impl DephasingBasis {
    pub fn new(zero: [C64; 2], one: [C64; 2]) -> Result<Self> {
        let dot = |a: &[C64; 2], b: &[C64; 2]| a[0].conj() * b[0] + a[1].conj() * b[1];
        let dev = [
            (dot(&zero, &zero) - 1.0).norm(),
            (dot(&one, &one) - 1.0).norm(),
            dot(&zero, &one).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if dev > TOL_CONSTRUCT {
            return Err(Error::InvalidParameter(format!(
                "dephasing basis not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Self { zero, one })
    }

    /// {H, V}: birefringent fibre.
    pub fn linear() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self { zero: [l, o], one: [o, l] }
    }

    /// {L, R}: unknown rotation about the propagation axis.
    pub fn circular() -> Self {
        let s = FRAC_1_SQRT_2;
        Self {
            zero: [C64::new(s, 0.0), C64::new(0.0, s)],
            one: [C64::new(s, 0.0), C64::new(0.0, -s)],
        }
    }

    pub fn zero(&self) -> [C64; 2] {
        self.zero
    }

    pub fn one(&self) -> [C64; 2] {
        self.one
    }

    pub fn is_linear(&self) -> bool {
        *self == Self::linear()
    }

    /// W with W|H⟩ = |b₀⟩ and W|V⟩ = |b₁⟩.
    pub fn frame(&self) -> Operator {
        let m = Matrix2::new(self.zero[0], self.one[0], self.zero[1], self.one[1]);
        Operator::new(CMatrix::from_fn(2, 2, |i, j| m[(i, j)]))
    }
}

impl Default for DephasingBasis {
    fn default() -> Self {
        Self::linear()
    }
}

/// Channel noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingSpec {
    pub basis: DephasingBasis,
    /// φ₀, radians.
    pub mean_phase: f64,
    /// Spread of the common phase (Gaussian only), radians.
    pub per_photon_sigma: f64,
    /// Spread of the relative phase between the two photons, radians.
    pub delta_sigma: f64,
    pub distribution: PhaseDistribution,
}

impl Default for DephasingSpec {
    fn default() -> Self {
        Self::uniform()
    }
}

impl DephasingSpec {
    pub fn uniform() -> Self {
        Self {
            basis: DephasingBasis::linear(),
            mean_phase: 0.0,
            per_photon_sigma: 0.0,
            delta_sigma: 0.0,
            distribution: PhaseDistribution::Uniform,
        }
    }

    pub fn gaussian(mean_phase: f64, sigma: f64) -> Self {
        Self {
            mean_phase,
            per_photon_sigma: sigma,
            distribution: PhaseDistribution::Gaussian,
            ..Self::uniform()
        }
    }

    pub fn with_delta_sigma(mut self, delta_sigma: f64) -> Self {
        self.delta_sigma = delta_sigma;
        self
    }

    pub fn with_basis(mut self, basis: DephasingBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("per_photon_sigma", self.per_photon_sigma), ("delta_sigma", self.delta_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.mean_phase.is_finite() {
            return Err(Error::InvalidParameter("mean_phase must be finite".into()));
        }
        Ok(())
    }

    pub fn is_collective(&self) -> bool {
        self.delta_sigma == 0.0
    }

    /// E[exp(i m φ)] for the common phase.
    pub fn common_characteristic(&self, m: i64) -> C64 {
        match self.distribution {
            PhaseDistribution::Uniform => {
                if m == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            PhaseDistribution::Gaussian => {
                let m = m as f64;
                let damp = (-0.5 * self.per_photon_sigma.powi(2) * m * m).exp();
                C64::from_polar(damp, self.mean_phase * m)
            }
        }
    }

    /// E[exp(i(m_first (φ + δ) + m_rest φ))] with `m_total = m_first + m_rest`.
    pub fn joint_characteristic(&self, m_total: i64, m_first: i64) -> C64 {
        let jitter = if self.delta_sigma > 0.0 {
            (-0.5 * (self.delta_sigma * m_first as f64).powi(2)).exp()
        } else {
            1.0
        };
        self.common_characteristic(m_total) * jitter
    }
}

/// Qubit positions that physically traverse the channel, in channel order.
/// With nonzero `delta_sigma` the first listed photon carries the jitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPhotonSet {
    indices: Vec<usize>,
}

impl ChannelPhotonSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        check_indices(&indices, usize::MAX)?;
        Ok(Self { indices })
    }

    pub fn single(index: usize) -> Self {
        Self { indices: vec![index] }
    }

    pub fn pair(first: usize, second: usize) -> Result<Self> {
        Self::new(vec![first, second])
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Strictly collective dephasing (`delta_sigma` must be zero).
pub fn collective_dephase(
    rho: &DensityOperator,
    photons: &ChannelPhotonSet,
    spec: &DephasingSpec,
) -> Result<DensityOperator> {
    if !spec.is_collective() {
        return Err(Error::NotCollective);
    }
    rotate_basis(spec, rho, photons)
}

/// Two-photon dephasing with common phase φ on both photons and an extra
/// Normal(0, σ_Δ²) phase on `photons.0`.
pub fn correlated_dephase(
    rho: &DensityOperator,
    photons: (usize, usize),
    spec: &DephasingSpec,
) -> Result<DensityOperator> {
    let set = ChannelPhotonSet::pair(photons.0, photons.1)?;
    rotate_basis(spec, rho, &set)
}

/// Conjugates the channel photons into the spec basis, applies the
/// collective or correlated map there, and conjugates back.
pub fn rotate_basis(
    spec: &DephasingSpec,
    rho: &DensityOperator,
    photons: &ChannelPhotonSet,
) -> Result<DensityOperator> {
    if !spec.is_collective() && photons.len() != 2 {
        return Err(Error::PhotonCount { expected: 2, got: photons.len() });
    }
    apply_channel(rho, photons, spec)
}

/// Dephasing with no restriction on the photon count; a single photon with
/// nonzero `delta_sigma` sees the combined phase φ + δ.
pub fn apply_channel(
    rho: &DensityOperator,
    photons: &ChannelPhotonSet,
    spec: &DephasingSpec,
) -> Result<DensityOperator> {
    spec.validate()?;
    let n = rho.n_qubits().ok_or(Error::NotQubitDimension(rho.dim()))?;
    check_indices(photons.indices(), n)?;
    if photons.is_empty() {
        return Ok(rho.clone());
    }

    let frame = frame_on(&spec.basis, photons.indices(), n)?;
    let m = match &frame {
        Some(w) => w.matrix().adjoint() * rho.matrix() * w.matrix(),
        None => rho.matrix().clone(),
    };

    let bit = |idx: usize, q: usize| ((idx >> (n - 1 - q)) & 1) as i64;
    let first = photons.indices()[0];
    let damped = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let m_total: i64 = photons.indices().iter().map(|&q| bit(i, q) - bit(j, q)).sum();
        let m_first = bit(i, first) - bit(j, first);
        m[(i, j)] * spec.joint_characteristic(m_total, m_first)
    });

    let out = match &frame {
        Some(w) => w.matrix() * damped * w.matrix().adjoint(),
        None => damped,
    };
    Ok(DensityOperator::from_raw(out, rho.norm()))
}

/// W on every channel photon, or `None` in the H/V frame.
fn frame_on(basis: &DephasingBasis, photons: &[usize], n: usize) -> Result<Option<Operator>> {
    if basis.is_linear() {
        return Ok(None);
    }
    let w = basis.frame();
    let mut full = Operator::identity(1 << n);
    for &q in photons {
        full = full.compose(&w.embed(&[q], n)?)?;
    }
    Ok(Some(full))
}
