use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::ensemble::FockEnsemble;
use super::state::{ModeIndex, Occupation, Pol, Spatial};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    /// Applied as loss on the watched spatial mode before detection.
    pub efficiency: f64,
    /// Click probability per window with no photon present.
    pub dark_count_prob: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self { efficiency: 1.0, dark_count_prob: 0.0 }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!("efficiency {} outside (0, 1]", self.efficiency)));
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(Error::InvalidParameter(format!("dark count probability {} outside [0, 1]", self.dark_count_prob)));
        }
        Ok(())
    }
}

/// Threshold detector on one spatial mode, optionally one polarization
/// port and one time bin (the coincidence window).
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub label: String,
    pub spatial: Spatial,
    pub pol: Option<Pol>,
    pub window: Option<i16>,
    pub spec: DetectorSpec,
}

impl Detector {
    pub fn new(label: &str, spatial: Spatial) -> Self {
        Self { label: label.into(), spatial, pol: None, window: None, spec: DetectorSpec::default() }
    }

    pub fn port(mut self, pol: Pol) -> Self {
        self.pol = Some(pol);
        self
    }

    pub fn window(mut self, bin: i16) -> Self {
        self.window = Some(bin);
        self
    }

    pub fn with_spec(mut self, spec: DetectorSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn watches(&self, m: &ModeIndex) -> bool {
        m.spatial == self.spatial
            && self.pol.is_none_or(|p| p == m.pol)
            && self.window.is_none_or(|w| w == m.bin)
    }

    fn probability(&self, occ: &Occupation, click: bool) -> f64 {
        let n = occ.iter().filter(|m| self.watches(m)).count();
        let silent = if n == 0 { 1.0 - self.spec.dark_count_prob } else { 0.0 };
        if click { 1.0 - silent } else { silent }
    }
}

/// Requested outcome per detector label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClickPattern {
    pub outcomes: BTreeMap<String, bool>,
}

impl ClickPattern {
    pub fn clicks(labels: &[&str]) -> Self {
        Self { outcomes: labels.iter().map(|l| (l.to_string(), true)).collect() }
    }

    pub fn with(mut self, label: &str, click: bool) -> Self {
        self.outcomes.insert(label.into(), click);
        self
    }
}

/// Probability of `pattern`; detectors not named in it are marginalized.
pub fn detect(state: &FockEnsemble, pattern: &ClickPattern, detectors: &[Detector]) -> Result<f64> {
    let mut used = Vec::new();
    for (label, &click) in &pattern.outcomes {
        let d = detectors
            .iter()
            .find(|d| &d.label == label)
            .ok_or_else(|| Error::UnknownDetector(label.clone()))?;
        d.spec.validate()?;
        used.push((d, click));
    }
    // Efficiency acts as loss on each distinct detected spatial mode.
    let mut lossy = state.clone();
    let mut seen = Vec::new();
    for (d, _) in &used {
        if d.spec.efficiency < 1.0 && !seen.contains(&d.spatial) {
            lossy = lossy.attenuate(d.spatial, d.spec.efficiency)?;
            seen.push(d.spatial);
        }
    }
    Ok(lossy.diagonal_expectation(|occ| used.iter().map(|(d, c)| d.probability(occ, *c)).product()))
}
