use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::qmath::C64;

/// Spatial mode labels of the apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spatial {
    /// Alice's local photon.
    A,
    /// Ancilla source port before the glass plate.
    C,
    /// Fibre input and transmission line.
    SIn,
    ArmS,
    ArmL,
    X,
    Y,
    /// Loss reservoir; never detected.
    Env(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 { Pol::H } else { Pol::V }
    }
}

/// One optical mode. `bin` counts half-delays: emission of the ancilla is
/// bin 0 and of the pair is bin 2. `internal` labels spectral-temporal
/// shape inside a bin; photons with different labels never interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub spatial: Spatial,
    pub pol: Pol,
    pub bin: i16,
    pub internal: u8,
}

impl ModeIndex {
    pub fn new(spatial: Spatial, pol: Pol, bin: i16) -> Self {
        Self { spatial, pol, bin, internal: 0 }
    }

    pub fn with_pol(self, pol: Pol) -> Self {
        Self { pol, ..self }
    }

    pub fn with_spatial(self, spatial: Spatial) -> Self {
        Self { spatial, ..self }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}@{}", self.spatial, self.pol, self.bin)?;
        if self.internal != 0 {
            write!(f, "#{}", self.internal)?;
        }
        Ok(())
    }
}

/// Sorted multiset of occupied modes; a mode appears once per photon.
pub type Occupation = Vec<ModeIndex>;

pub const DEFAULT_N_MAX: usize = 4;
const PRUNE: f64 = 1e-30;

/// Sparse pure state over the modes that appear in its terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    terms: BTreeMap<Occupation, C64>,
    n_max: usize,
    next_env: u16,
}

impl FockState {
    pub fn vacuum(n_max: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), C64::new(1.0, 0.0));
        Self { terms, n_max, next_env: 0 }
    }

    pub fn empty(n_max: usize) -> Self {
        Self { terms: BTreeMap::new(), n_max, next_env: 0 }
    }

    /// Single term; `modes` need not be sorted.
    pub fn from_modes(mut modes: Vec<ModeIndex>, amp: C64, n_max: usize) -> Result<Self> {
        if modes.len() > n_max {
            return Err(Error::Truncation(format!("{} photons exceed N_max = {n_max}", modes.len())));
        }
        modes.sort();
        let mut terms = BTreeMap::new();
        terms.insert(modes, amp);
        Ok(Self { terms, n_max, next_env: 0 })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn terms(&self) -> &BTreeMap<Occupation, C64> {
        &self.terms
    }

    pub fn amplitude(&self, occ: &[ModeIndex]) -> C64 {
        let mut key = occ.to_vec();
        key.sort();
        self.terms.get(&key).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_photons(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let terms = self.terms.iter().map(|(k, a)| (k.clone(), a * factor)).collect();
        Self { terms, ..self.clone() }
    }

    pub fn add(&mut self, other: &FockState) {
        for (k, a) in &other.terms {
            *self.terms.entry(k.clone()).or_default() += a;
        }
        self.next_env = self.next_env.max(other.next_env);
        self.prune();
    }

    /// Terms satisfying `keep`.
    pub fn filter<F: Fn(&Occupation) -> bool>(&self, keep: F) -> Self {
        let terms = self.terms.iter().filter(|(k, _)| keep(k)).map(|(k, a)| (k.clone(), *a)).collect();
        Self { terms, ..self.clone() }
    }

    /// Applies the creation operator Σ c_m a†_m.
    pub fn create(&self, coeffs: &[(ModeIndex, C64)]) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.terms {
            if occ.len() + 1 > self.n_max {
                return Err(Error::Truncation(format!("creation beyond N_max = {}", self.n_max)));
            }
            for &(m, c) in coeffs {
                let n = occ.iter().filter(|&&x| x == m).count();
                let mut next = occ.clone();
                let pos = next.partition_point(|x| *x <= m);
                next.insert(pos, m);
                *out.entry(next).or_insert(C64::new(0.0, 0.0)) += amp * c * ((n + 1) as f64).sqrt();
            }
        }
        let mut s = Self { terms: out, ..self.clone() };
        s.prune();
        Ok(s)
    }

    /// State produced by independent creation polynomials of `self` and
    /// `other` acting together on the vacuum.
    pub fn product(&self, other: &FockState) -> Result<Self> {
        let n_max = self.n_max.max(other.n_max);
        let mut out = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                if a.len() + b.len() > n_max {
                    return Err(Error::Truncation(format!(
                        "product has {} photons, N_max = {n_max}",
                        a.len() + b.len()
                    )));
                }
                let mut merged: Vec<ModeIndex> = a.iter().chain(b.iter()).copied().collect();
                merged.sort();
                // (a†)^p (a†)^q = √((p+q)!/(p! q!)) per shared mode, in normalized units.
                let factor = merged_factor(a, b);
                *out.entry(merged).or_insert(C64::new(0.0, 0.0)) += x * y * factor;
            }
        }
        let mut s = Self { terms: out, n_max, next_env: self.next_env.max(other.next_env) };
        s.prune();
        Ok(s)
    }

    /// Lifts a single-photon mode map to the Fock space by expanding each
    /// product of creation operators.
    pub fn apply_linear<F>(&self, map: F) -> Self
    where
        F: Fn(&ModeIndex) -> Vec<(ModeIndex, C64)>,
    {
        let mut out: BTreeMap<Occupation, C64> = BTreeMap::new();
        let mut cache: BTreeMap<ModeIndex, Vec<(ModeIndex, C64)>> = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let mut poly: BTreeMap<Occupation, C64> = BTreeMap::new();
            poly.insert(Vec::new(), C64::new(1.0, 0.0));
            for m in occ {
                let image = cache.entry(*m).or_insert_with(|| map(m)).clone();
                let mut next = BTreeMap::new();
                for (mono, c) in &poly {
                    for &(target, u) in &image {
                        let mut grown = mono.clone();
                        let pos = grown.partition_point(|x| *x <= target);
                        grown.insert(pos, target);
                        *next.entry(grown).or_insert(C64::new(0.0, 0.0)) += c * u;
                    }
                }
                poly = next;
            }
            let norm_in = occupation_factorial_root(occ);
            for (mono, c) in poly {
                let f = occupation_factorial_root(&mono) / norm_in;
                *out.entry(mono).or_insert(C64::new(0.0, 0.0)) += amp * c * f;
            }
        }
        let mut s = Self { terms: out, ..self.clone() };
        s.prune();
        s
    }

    pub(crate) fn next_env(&self) -> u16 {
        self.next_env
    }

    pub(crate) fn set_next_env(&mut self, v: u16) {
        self.next_env = v;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm_sqr() > PRUNE);
    }
}

/// Π √(n_k!) over the multiplicities of a sorted occupation.
pub(crate) fn occupation_factorial_root(occ: &[ModeIndex]) -> f64 {
    let mut f = 1.0;
    let mut run = 0usize;
    for (i, m) in occ.iter().enumerate() {
        run = if i > 0 && occ[i - 1] == *m { run + 1 } else { 1 };
        f *= run as f64;
    }
    f.sqrt()
}

fn merged_factor(a: &[ModeIndex], b: &[ModeIndex]) -> f64 {
    let mut merged: Vec<ModeIndex> = a.iter().chain(b.iter()).copied().collect();
    merged.sort();
    occupation_factorial_root(&merged) / (occupation_factorial_root(a) * occupation_factorial_root(b))
}
