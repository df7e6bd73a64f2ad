use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::channels::DephasingSpec;
use crate::error::{Error, Result};
use crate::qmath::C64;

use super::elements::{apply_element, attenuate_with, Element, Jones};
use super::state::{FockState, Occupation, Pol, Spatial};

/// ρ = Σ_ij c_ij |ψ_i⟩⟨ψ_j|. Components are unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FockEnsemble {
    components: Vec<FockState>,
    coherence: DMatrix<C64>,
}

impl FockEnsemble {
    pub fn pure(state: FockState) -> Self {
        Self { components: vec![state], coherence: DMatrix::from_element(1, 1, C64::new(1.0, 0.0)) }
    }

    pub fn new(components: Vec<FockState>, coherence: DMatrix<C64>) -> Result<Self> {
        let n = components.len();
        if coherence.nrows() != n || coherence.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: coherence.nrows() });
        }
        Ok(Self { components, coherence })
    }

    pub fn components(&self) -> &[FockState] {
        &self.components
    }

    pub fn coherence(&self) -> &DMatrix<C64> {
        &self.coherence
    }

    pub fn apply(&self, element: &Element) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| apply_element(c, element))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components, coherence: self.coherence.clone() })
    }

    pub fn attenuate(&self, target: Spatial, eta: f64) -> Result<Self> {
        let env = self.components.iter().map(FockState::next_env).max().unwrap_or(0);
        let components = self
            .components
            .iter()
            .map(|c| attenuate_with(c, target, eta, env))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components, coherence: self.coherence.clone() })
    }

    /// Σ_k w(k) ⟨k|ρ|k⟩ for a weight diagonal in the occupation basis.
    pub fn diagonal_expectation<W: Fn(&Occupation) -> f64>(&self, weight: W) -> f64 {
        let mut by_term: BTreeMap<&Occupation, Vec<(usize, C64)>> = BTreeMap::new();
        for (i, c) in self.components.iter().enumerate() {
            for (k, a) in c.terms() {
                by_term.entry(k).or_default().push((i, *a));
            }
        }
        let mut total = 0.0;
        for (k, amps) in by_term {
            let w = weight(k);
            if w == 0.0 {
                continue;
            }
            let mut diag = C64::new(0.0, 0.0);
            for &(i, ai) in &amps {
                for &(j, aj) in &amps {
                    diag += self.coherence[(i, j)] * ai * aj.conj();
                }
            }
            total += w * diag.re;
        }
        total
    }

    pub fn trace(&self) -> f64 {
        self.diagonal_expectation(|_| 1.0)
    }
}

/// Random relative phase on the photons of `target`: φ on every photon and
/// an extra δ on photons at bins ≥ `jitter_from_bin`, averaged analytically.
/// The state is split by the number of photons in the dephased basis state
/// per group, and the coherence between groups carries the characteristic
/// function of the phase difference.
pub fn dephase(
    state: &FockState,
    target: Spatial,
    spec: &DephasingSpec,
    jitter_from_bin: i16,
) -> Result<FockEnsemble> {
    spec.validate()?;
    // Rotate so the dephased basis state sits on V.
    let w = Jones::from_columns(spec.basis.zero(), spec.basis.one());
    let linear = spec.basis.is_linear();
    let rotated = if linear {
        state.clone()
    } else {
        apply_element(state, &Element::Waveplate { jones: w.adjoint(), target })?
    };
    let mut groups: BTreeMap<(i64, i64), FockState> = BTreeMap::new();
    for (occ, amp) in rotated.terms() {
        let (mut early, mut late) = (0i64, 0i64);
        for m in occ.iter().filter(|m| m.spatial == target && m.pol == Pol::V) {
            if m.bin >= jitter_from_bin { late += 1 } else { early += 1 }
        }
        let group = groups.entry((early, late)).or_insert_with(|| {
            let mut g = FockState::empty(state.n_max());
            g.set_next_env(state.next_env());
            g
        });
        group.add(&FockState::from_modes(occ.clone(), *amp, state.n_max())?);
    }
    let keys: Vec<(i64, i64)> = groups.keys().copied().collect();
    let coherence = DMatrix::from_fn(keys.len(), keys.len(), |i, j| {
        let (ei, li) = keys[i];
        let (ej, lj) = keys[j];
        spec.joint_characteristic(ei + li - ej - lj, li - lj)
    });
    let mut components: Vec<FockState> = groups.into_values().collect();
    if !linear {
        for c in components.iter_mut() {
            *c = apply_element(c, &Element::Waveplate { jones: w, target })?;
        }
    }
    FockEnsemble::new(components, coherence)
}
