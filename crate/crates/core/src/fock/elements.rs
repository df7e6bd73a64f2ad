use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::qmath::C64;

use super::state::{FockState, ModeIndex, Pol, Spatial};

/// Polarization map in the (H, V) basis: a photon in |p⟩ leaves in
/// Σ_q J[q][p] |q⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones(pub [[C64; 2]; 2]);

impl Jones {
    pub fn identity() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Jones([[o, z], [z, o]])
    }

    /// Half-wave plate with fast axis at `theta_deg` from H.
    pub fn hwp(theta_deg: f64) -> Self {
        let t = 2.0 * theta_deg.to_radians();
        let (c, s) = (C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0));
        Jones([[c, s], [s, -c]])
    }

    /// Quarter-wave plate with fast axis at `theta_deg` from H.
    pub fn qwp(theta_deg: f64) -> Self {
        let t = theta_deg.to_radians();
        let (c, s) = (t.cos(), t.sin());
        let i = C64::new(0.0, 1.0);
        let off = (C64::new(1.0, 0.0) - i) * (s * c);
        Jones([[C64::new(c * c, 0.0) + i * (s * s), off], [off, C64::new(s * s, 0.0) + i * (c * c)]])
    }

    /// Phase `phi` on V relative to H.
    pub fn phase(phi: f64) -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Jones([[o, z], [z, C64::from_polar(1.0, phi)]])
    }

    /// Maps `ket` onto H and its orthogonal complement onto V.
    pub fn onto_h(ket: [C64; 2]) -> Self {
        Jones([[ket[0].conj(), ket[1].conj()], [-ket[1], ket[0]]])
    }

    pub fn from_columns(c0: [C64; 2], c1: [C64; 2]) -> Self {
        Jones([[c0[0], c1[0]], [c0[1], c1[1]]])
    }

    pub fn adjoint(&self) -> Self {
        let m = self.0;
        Jones([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn unitarity_error(&self) -> f64 {
        let m = self.0;
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let dot = m[0][i].conj() * m[0][j] + m[1][i].conj() * m[1][j];
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot - target).norm());
            }
        }
        err
    }
}

/// Linear optical element acting on every bin and internal label of the
/// named spatial modes.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    /// a† → cos θ a† + sin θ b†, b† → −sin θ a† + cos θ b†.
    BeamSplitter { theta: f64, a: Spatial, b: Spatial },
    /// H of `inputs.0` and V of `inputs.1` leave through `outputs.0`; the
    /// other two through `outputs.1`. Output-labelled photons map back, so
    /// the element is a mode permutation.
    Pbs { inputs: (Spatial, Spatial), outputs: (Spatial, Spatial) },
    Waveplate { jones: Jones, target: Spatial },
    /// Shifts the bin of `target` photons, optionally of one polarization.
    Delay { target: Spatial, pol: Option<Pol>, bins: i16 },
    /// Exchanges two spatial labels, within one bin if `bin` is set; a
    /// relabeling when one side is empty.
    Swap { a: Spatial, b: Spatial, bin: Option<i16> },
}

impl Element {
    pub fn balanced_bs(a: Spatial, b: Spatial) -> Self {
        Element::BeamSplitter { theta: FRAC_PI_4, a, b }
    }

    pub fn hwp(theta_deg: f64, target: Spatial) -> Self {
        Element::Waveplate { jones: Jones::hwp(theta_deg), target }
    }

    pub fn qwp(theta_deg: f64, target: Spatial) -> Self {
        Element::Waveplate { jones: Jones::qwp(theta_deg), target }
    }

    pub fn phase(phi: f64, target: Spatial) -> Self {
        Element::Waveplate { jones: Jones::phase(phi), target }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Element::BeamSplitter { a, b, theta } => {
                if a == b {
                    return Err(Error::Arity("beam splitter needs two distinct modes".into()));
                }
                if !theta.is_finite() {
                    return Err(Error::InvalidParameter("beam splitter angle".into()));
                }
            }
            Element::Pbs { inputs, outputs } => {
                let all = [inputs.0, inputs.1, outputs.0, outputs.1];
                if (0..4).any(|i| (i + 1..4).any(|j| all[i] == all[j])) {
                    return Err(Error::Arity("PBS needs four distinct modes".into()));
                }
            }
            Element::Waveplate { jones, .. } => {
                let err = jones.unitarity_error();
                if err > 1e-12 {
                    return Err(Error::NotUnitary(err));
                }
            }
            Element::Delay { .. } | Element::Swap { .. } => {}
        }
        Ok(())
    }

    fn image(&self, m: &ModeIndex) -> Vec<(ModeIndex, C64)> {
        let one = C64::new(1.0, 0.0);
        match self {
            Element::BeamSplitter { theta, a, b } => {
                let (c, s) = (C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0));
                if m.spatial == *a {
                    vec![(*m, c), (m.with_spatial(*b), s)]
                } else if m.spatial == *b {
                    vec![(m.with_spatial(*a), -s), (*m, c)]
                } else {
                    vec![(*m, one)]
                }
            }
            Element::Pbs { inputs, outputs } => {
                let out = match (m.spatial, m.pol) {
                    (s, Pol::H) if s == inputs.0 => outputs.0,
                    (s, Pol::V) if s == inputs.0 => outputs.1,
                    (s, Pol::H) if s == inputs.1 => outputs.1,
                    (s, Pol::V) if s == inputs.1 => outputs.0,
                    (s, Pol::H) if s == outputs.0 => inputs.0,
                    (s, Pol::V) if s == outputs.0 => inputs.1,
                    (s, Pol::V) if s == outputs.1 => inputs.0,
                    (s, Pol::H) if s == outputs.1 => inputs.1,
                    _ => m.spatial,
                };
                vec![(m.with_spatial(out), one)]
            }
            Element::Waveplate { jones, target } => {
                if m.spatial != *target {
                    return vec![(*m, one)];
                }
                let p = m.pol.index();
                (0..2)
                    .map(|q| (m.with_pol(Pol::from_index(q)), jones.0[q][p]))
                    .filter(|(_, u)| u.norm_sqr() > 0.0)
                    .collect()
            }
            Element::Delay { target, pol, bins } => {
                if m.spatial == *target && pol.is_none_or(|p| p == m.pol) {
                    vec![(ModeIndex { bin: m.bin + bins, ..*m }, one)]
                } else {
                    vec![(*m, one)]
                }
            }
            Element::Swap { a, b, bin } => {
                let s = if bin.is_some_and(|t| t != m.bin) {
                    m.spatial
                } else if m.spatial == *a {
                    *b
                } else if m.spatial == *b {
                    *a
                } else {
                    m.spatial
                };
                vec![(m.with_spatial(s), one)]
            }
        }
    }
}

/// Applies a linear element; photon number is conserved term by term.
pub fn apply_element(state: &FockState, element: &Element) -> Result<FockState> {
    element.validate()?;
    Ok(state.apply_linear(|m| element.image(m)))
}

/// Couples every mode of `target` to a fresh reservoir through a beam
/// splitter of transmittance `eta`. The reservoir stays in the state as a
/// purification and is traced out by detection.
pub fn attenuate(state: &FockState, target: Spatial, eta: f64) -> Result<FockState> {
    attenuate_with(state, target, eta, state.next_env())
}

pub(crate) fn attenuate_with(state: &FockState, target: Spatial, eta: f64, env: u16) -> Result<FockState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("transmittance {eta} outside [0, 1]")));
    }
    if eta == 1.0 {
        return Ok(state.clone());
    }
    let (t, r) = (C64::new(eta.sqrt(), 0.0), C64::new((1.0 - eta).sqrt(), 0.0));
    let mut out = state.apply_linear(|m| {
        if m.spatial == target {
            vec![(*m, t), (m.with_spatial(Spatial::Env(env)), r)]
        } else {
            vec![(*m, C64::new(1.0, 0.0))]
        }
    });
    out.set_next_env(env.max(state.next_env()) + 1);
    Ok(out)
}
