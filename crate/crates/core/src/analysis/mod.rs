//! Statistics on two-photon polarization states and coincidence counts.

mod bootstrap;
mod chsh;
mod counts;
mod delay;
mod entanglement;
mod tomography;

pub use bootstrap::{fidelity_from_counts, linear_functional_sd, monte_carlo_sd, BootstrapResult};
pub use chsh::{chsh_from_counts, chsh_from_rates, chsh_records, chsh_settings, chsh_value, ChshAngles};
pub use counts::{exposures_for_total, simulate_counts, Exposure};
pub use delay::{
    delay_envelope, delay_scan, gaussian_fit, transform_limit_fwhm, DelayCurves, DelayFit,
    DelayScanModel,
};
pub use entanglement::{binary_entropy, concurrence, entanglement_of_formation};
pub use tomography::{
    linear_from_values, log_likelihood, tomo_linear, tomo_mle, MleOptions, TomographyResult,
};

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::qmath::{CMatrix, Operator, StateVector, Tensor, C64};

/// Polarization analyzer: projects onto one state; its complement is the
/// orthogonal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analyzer {
    /// cos θ |H⟩ + sin θ |V⟩; angle kept in [0°, 180°).
    Linear { angle_deg: f64 },
    /// (|H⟩ − i|V⟩)/√2
    RightCircular,
    /// (|H⟩ + i|V⟩)/√2
    LeftCircular,
}

impl Analyzer {
    pub fn linear(angle_deg: f64) -> Self {
        Analyzer::Linear { angle_deg: angle_deg.rem_euclid(180.0) }
    }

    pub fn h() -> Self {
        Self::linear(0.0)
    }

    pub fn v() -> Self {
        Self::linear(90.0)
    }

    pub fn d() -> Self {
        Self::linear(45.0)
    }

    pub fn dbar() -> Self {
        Self::linear(135.0)
    }

    pub fn ket(&self) -> [C64; 2] {
        match *self {
            Analyzer::Linear { angle_deg } => {
                let t = angle_deg.to_radians();
                [C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]
            }
            Analyzer::RightCircular => [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2)],
            Analyzer::LeftCircular => [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)],
        }
    }

    pub fn state(&self) -> StateVector {
        StateVector::new(self.ket().to_vec()).expect("unit ket")
    }

    pub fn orthogonal(&self) -> Self {
        match *self {
            Analyzer::Linear { angle_deg } => Self::linear(angle_deg + 90.0),
            Analyzer::RightCircular => Analyzer::LeftCircular,
            Analyzer::LeftCircular => Analyzer::RightCircular,
        }
    }

    pub fn projector(&self) -> CMatrix {
        let k = self.ket();
        CMatrix::from_fn(2, 2, |i, j| k[i] * k[j].conj())
    }

    /// Same projector, tolerant to angle rounding.
    pub fn matches(&self, other: &Analyzer) -> bool {
        match (self, other) {
            (Analyzer::Linear { angle_deg: a }, Analyzer::Linear { angle_deg: b }) => {
                let d = (a - b).rem_euclid(180.0);
                d < 1e-9 || 180.0 - d < 1e-9
            }
            _ => self == other,
        }
    }

    fn short_label(&self) -> String {
        match *self {
            Analyzer::Linear { angle_deg } if angle_deg == 0.0 => "H".into(),
            Analyzer::Linear { angle_deg } if angle_deg == 90.0 => "V".into(),
            Analyzer::Linear { angle_deg } if angle_deg == 45.0 => "D".into(),
            Analyzer::Linear { angle_deg } if angle_deg == 135.0 => "A".into(),
            Analyzer::Linear { angle_deg } => format!("{angle_deg}"),
            Analyzer::RightCircular => "R".into(),
            Analyzer::LeftCircular => "L".into(),
        }
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_label())
    }
}

/// Analyzer pair for photon A and the remote photon.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasSetting {
    pub a: Analyzer,
    pub b: Analyzer,
    pub label: String,
}

impl MeasSetting {
    pub fn new(a: Analyzer, b: Analyzer) -> Self {
        Self { label: format!("{a}{b}"), a, b }
    }

    pub fn projector(&self) -> Operator {
        Operator::new(self.a.projector()).tensor(&Operator::new(self.b.projector()))
    }

    pub fn matches(&self, a: &Analyzer, b: &Analyzer) -> bool {
        self.a.matches(a) && self.b.matches(b)
    }
}

/// {H, V, D, R} × {H, V, D, R}, A-major.
pub fn tomography_settings() -> Vec<MeasSetting> {
    let side = [Analyzer::h(), Analyzer::v(), Analyzer::d(), Analyzer::RightCircular];
    side.iter()
        .flat_map(|a| side.iter().map(move |b| MeasSetting::new(*a, *b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: MeasSetting,
    pub count: u64,
    pub duration_s: f64,
}

impl CountRecord {
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.duration_s
    }
}

pub(crate) fn require_two_qubits(dim: usize) -> Result<()> {
    if dim != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: dim });
    }
    Ok(())
}

pub(crate) fn validate_records(records: &[CountRecord]) -> Result<()> {
    for r in records {
        if !(r.duration_s > 0.0) || !r.duration_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duration for setting {} must be positive",
                r.setting.label
            )));
        }
    }
    Ok(())
}
