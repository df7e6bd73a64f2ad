use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::qmath::{StateVector, C64};

use super::state::{FockState, ModeIndex, Pol, Spatial};

/// Emission bins: the ancilla pulse leads the pair by two bins.
pub const EARLY_BIN: i16 = 0;
pub const LATE_BIN: i16 = 2;

/// Two-photon polarization amplitudes M[a][b] for (A, S); unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAmplitudes(pub [[C64; 2]; 2]);

impl PairAmplitudes {
    /// (|HH⟩ − |VV⟩)/√2
    pub fn phi_minus() -> Self {
        let z = C64::new(0.0, 0.0);
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        PairAmplitudes([[s, z], [z, -s]])
    }

    /// From a 2-qubit state ordered (A, S).
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        if psi.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: psi.dim() });
        }
        let a = psi.amplitudes();
        Ok(PairAmplitudes([[a[0], a[1]], [a[2], a[3]]]))
    }

    pub fn to_state(&self) -> StateVector {
        let m = self.0;
        StateVector::new(vec![m[0][0], m[0][1], m[1][0], m[1][1]]).expect("unit norm")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    /// Single-pair probability relative to vacuum.
    pub gamma: f64,
    /// Mean ancilla photon number at the fibre input.
    pub nu: f64,
    /// Highest pair number kept.
    pub spdc_order: usize,
    /// Highest ancilla photon number kept.
    pub wcp_order: usize,
    pub pair: PairAmplitudes,
    /// Ancilla polarization in (H, V).
    pub wcp_polarization: [C64; 2],
    /// |⟨pair photon|ancilla photon⟩|² over spectral-temporal shape.
    pub mode_overlap: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        Self {
            gamma: 1e-3,
            nu: 1e-1,
            spdc_order: 2,
            wcp_order: 4,
            pair: PairAmplitudes::phi_minus(),
            wcp_polarization: [s, s],
            mode_overlap: 1.0,
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.nu) {
            return Err(Error::InvalidParameter(format!("nu {} outside [0, 1)", self.nu)));
        }
        if !(0.0..=1.0).contains(&self.mode_overlap) {
            return Err(Error::InvalidParameter(format!("mode overlap {} outside [0, 1]", self.mode_overlap)));
        }
        let norm: f64 = self.pair.0.iter().flatten().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("pair amplitudes must have unit norm".into()));
        }
        let p: f64 = self.wcp_polarization.iter().map(|a| a.norm_sqr()).sum();
        if (p - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("ancilla polarization must have unit norm".into()));
        }
        Ok(())
    }
}

fn pair_creation(pair: &PairAmplitudes) -> Vec<(ModeIndex, ModeIndex, C64)> {
    let mut out = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let c = pair.0[a][b];
            if c.norm_sqr() > 0.0 {
                out.push((
                    ModeIndex::new(Spatial::A, Pol::from_index(a), LATE_BIN),
                    ModeIndex::new(Spatial::SIn, Pol::from_index(b), LATE_BIN),
                    c,
                ));
            }
        }
    }
    out
}

/// Terms (√γ K)^k/k! |0⟩ for k = 0..=order with K = Σ M_ab a†_{A,a} a†_{S,b},
/// scaled so their total norm is one.
pub fn spdc_terms(
    gamma: f64,
    pair: &PairAmplitudes,
    order: usize,
    n_max: usize,
) -> Result<Vec<FockState>> {
    if 2 * order > n_max {
        return Err(Error::Truncation(format!("{order} pairs need {} photons, N_max = {n_max}", 2 * order)));
    }
    let k_ops = pair_creation(pair);
    let mut terms = vec![FockState::vacuum(n_max)];
    for k in 1..=order {
        let prev = &terms[k - 1];
        let mut next = FockState::empty(n_max);
        for &(a, s, c) in &k_ops {
            let applied = prev.create(&[(s, C64::new(1.0, 0.0))])?.create(&[(a, c)])?;
            next.add(&applied);
        }
        terms.push(next.scale(C64::new(gamma.sqrt() / k as f64, 0.0)));
    }
    let z: f64 = terms.iter().map(FockState::norm_sqr).sum();
    Ok(terms.iter().map(|t| t.scale(C64::new(1.0 / z.sqrt(), 0.0))).collect())
}

/// Truncated, renormalized exp(√γ K)|0⟩.
pub fn build_spdc(gamma: f64, truncation: usize, n_max: usize) -> Result<FockState> {
    sum_terms(spdc_terms(gamma, &PairAmplitudes::phi_minus(), truncation, n_max)?, n_max)
}

/// Photon-number terms e^{−ν/2} (√ν a†)^n / n! |0⟩ for n = 0..=order of a
/// coherent pulse in mode C, bin 0. With `overlap` < 1 the pulse occupies
/// √overlap·(internal 0) + √(1 − overlap)·(internal 1).
pub fn wcp_terms(
    nu: f64,
    polarization: [C64; 2],
    overlap: f64,
    order: usize,
    n_max: usize,
) -> Result<Vec<FockState>> {
    if order > n_max {
        return Err(Error::Truncation(format!("{order} ancilla photons exceed N_max = {n_max}")));
    }
    let mut creation = Vec::new();
    for (internal, weight) in [(0u8, overlap.sqrt()), (1u8, (1.0 - overlap).sqrt())] {
        if weight == 0.0 {
            continue;
        }
        for p in 0..2 {
            let c = polarization[p] * weight;
            if c.norm_sqr() > 0.0 {
                let m = ModeIndex { spatial: Spatial::C, pol: Pol::from_index(p), bin: EARLY_BIN, internal };
                creation.push((m, c));
            }
        }
    }
    let mut terms = vec![FockState::vacuum(n_max).scale(C64::new((-nu / 2.0).exp(), 0.0))];
    for n in 1..=order {
        let next = terms[n - 1].create(&creation)?.scale(C64::new(nu.sqrt() / n as f64, 0.0));
        terms.push(next);
    }
    Ok(terms)
}

/// Coherent pulse of mean photon number ν, Poisson-truncated; the norm
/// deficit is the dropped Poisson tail.
pub fn build_wcp(nu: f64, polarization: [C64; 2], truncation: usize, n_max: usize) -> Result<FockState> {
    sum_terms(wcp_terms(nu, polarization, 1.0, truncation, n_max)?, n_max)
}

fn sum_terms(terms: Vec<FockState>, n_max: usize) -> Result<FockState> {
    let mut out = FockState::empty(n_max);
    for t in &terms {
        out.add(t);
    }
    Ok(out)
}

/// Σ_n n |c_n|² over photon-number terms.
pub fn mean_photon_number(state: &FockState) -> f64 {
    state.terms().iter().map(|(k, a)| k.len() as f64 * a.norm_sqr()).sum()
}
