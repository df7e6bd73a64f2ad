use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::analysis::{linear_from_values, tomography_settings, Analyzer, MeasSetting};
use crate::channels::DephasingSpec;
use crate::error::{Error, Result};
use crate::qmath::{DensityOperator, C64};

use super::detect::{detect, ClickPattern, Detector, DetectorSpec};
use super::elements::{apply_element, attenuate, Element, Jones};
use super::ensemble::{dephase, FockEnsemble};
use super::sources::{spdc_terms, wcp_terms, SourceSpec, EARLY_BIN, LATE_BIN};
use super::state::{FockState, Pol, Spatial, DEFAULT_N_MAX};

/// Extra bins for the long arm; equal to the emission offset so the
/// correctly routed photons meet.
pub const LONG_ARM_BINS: i16 = 2;
/// Fibre group delay of V relative to H, when enabled.
pub const GROUP_DELAY_BINS: i16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SetupConfig {
    pub source: SourceSpec,
    pub channel: DephasingSpec,
    /// Channel transmittance.
    pub eta: f64,
    pub detector: DetectorSpec,
    pub n_max: usize,
    pub keep_dbar: bool,
    /// Delay V photons in the fibre by one bin.
    pub group_delay: bool,
    /// (pairs, ancilla photons) emission terms to keep; `None` keeps every
    /// term within the truncation.
    pub emissions: Option<Vec<(usize, usize)>>,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self {
            source: SourceSpec::default(),
            channel: DephasingSpec::uniform(),
            eta: 1.0,
            detector: DetectorSpec::default(),
            n_max: DEFAULT_N_MAX,
            keep_dbar: false,
            group_delay: false,
            emissions: None,
        }
    }
}

impl SetupConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.detector.validate()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta {} outside [0, 1]", self.eta)));
        }
        if self.n_max < 3 {
            return Err(Error::Truncation(format!("N_max = {} cannot hold a pair and an ancilla", self.n_max)));
        }
        if 2 * self.source.spdc_order > self.n_max || self.source.wcp_order > self.n_max {
            return Err(Error::Truncation(format!(
                "source orders ({}, {}) exceed N_max = {}",
                self.source.spdc_order, self.source.wcp_order, self.n_max
            )));
        }
        Ok(())
    }

    fn y_window(&self) -> i16 {
        LATE_BIN + if self.group_delay { GROUP_DELAY_BINS } else { 0 }
    }

    fn emission_terms(&self) -> Vec<(usize, usize)> {
        let all = (0..=self.source.spdc_order)
            .flat_map(|p| (0..=self.source.wcp_order).map(move |w| (p, w)))
            .filter(|&(p, w)| 2 * p + w <= self.n_max);
        match &self.emissions {
            Some(keep) => all.filter(|t| keep.contains(t)).collect(),
            None => all.collect(),
        }
    }
}

/// Source terms by which photons reach Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmissionCase {
    /// One pair and one ancilla photon.
    SpdcWcp,
    /// One pair and two ancilla photons.
    WcpWcp,
    /// Two pairs, no ancilla.
    SpdcSpdc,
    Other,
}

impl EmissionCase {
    pub fn classify(pairs: usize, ancillas: usize) -> Self {
        match (pairs, ancillas) {
            (1, 1) => EmissionCase::SpdcWcp,
            (1, 2) => EmissionCase::WcpWcp,
            (2, 0) => EmissionCase::SpdcSpdc,
            _ => EmissionCase::Other,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EmissionCase::SpdcWcp => "i",
            EmissionCase::WcpWcp => "ii",
            EmissionCase::SpdcSpdc => "iii",
            EmissionCase::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupResult {
    /// Normalized (A, Y) polarization state from the 16 analyzer settings.
    pub rho_ay: DensityOperator,
    /// Threefold probability per pulse with no analyzers.
    pub threefold_probability: f64,
    pub breakdown: BTreeMap<EmissionCase, f64>,
    pub setting_probabilities: Vec<(MeasSetting, f64)>,
    /// Smallest eigenvalue of the inverted matrix before any projection.
    pub raw_min_eigenvalue: f64,
    pub projected: bool,
}

/// Sources through the fibre and the parity gate, up to the detectors.
fn propagate(cfg: &SetupConfig, pairs: &FockState, ancilla: &FockState) -> Result<FockEnsemble> {
    let mut s = pairs.product(ancilla)?;
    // Glass plate joins the ancilla to the signal; its transmission is part of ν.
    s = apply_element(&s, &Element::Swap { a: Spatial::C, b: Spatial::SIn, bin: Some(EARLY_BIN) })?;
    // Loss commutes with the phase noise, so it is applied first.
    s = attenuate(&s, Spatial::SIn, cfg.eta)?;
    let frame = (!cfg.channel.basis.is_linear())
        .then(|| Jones::from_columns(cfg.channel.basis.zero(), cfg.channel.basis.one()));
    if let Some(w) = frame {
        s = apply_element(&s, &Element::Waveplate { jones: w, target: Spatial::SIn })?;
    }
    let mut e = dephase(&s, Spatial::SIn, &cfg.channel, LATE_BIN)?;
    if let Some(w) = frame {
        e = e.apply(&Element::Waveplate { jones: w.adjoint(), target: Spatial::SIn })?;
    }
    if cfg.group_delay {
        e = e.apply(&Element::Delay { target: Spatial::SIn, pol: Some(Pol::V), bins: GROUP_DELAY_BINS })?;
    }
    let circuit = [
        Element::Swap { a: Spatial::SIn, b: Spatial::ArmS, bin: None },
        Element::balanced_bs(Spatial::ArmS, Spatial::ArmL),
        Element::Delay { target: Spatial::ArmL, pol: None, bins: LONG_ARM_BINS },
        Element::hwp(45.0, Spatial::ArmL),
        Element::Pbs { inputs: (Spatial::ArmS, Spatial::ArmL), outputs: (Spatial::X, Spatial::Y) },
        Element::hwp(22.5, Spatial::X),
    ];
    for el in &circuit {
        e = e.apply(el)?;
    }
    Ok(e)
}

/// Threefold probability with optional analyzers on A and Y, summed over
/// the kept X branches.
fn threefold(cfg: &SetupConfig, e: &FockEnsemble, analyzers: Option<(Analyzer, Analyzer)>) -> Result<f64> {
    let port = analyzers.map(|_| Pol::H);
    let det = |label: &str, spatial| Detector { label: label.into(), spatial, pol: port, window: None, spec: cfg.detector };
    let detectors = [
        det("D_A", Spatial::A),
        det("D_Y", Spatial::Y).window(cfg.y_window()),
        Detector::new("D_X", Spatial::X).port(Pol::H).window(LATE_BIN).with_spec(cfg.detector),
        Detector::new("D_Xbar", Spatial::X).port(Pol::V).window(LATE_BIN).with_spec(cfg.detector),
    ];
    let analyze = |e: &FockEnsemble, flip_y: bool| -> Result<FockEnsemble> {
        let mut e = e.clone();
        if flip_y {
            e = e.apply(&Element::phase(std::f64::consts::PI, Spatial::Y))?;
        }
        if let Some((a, b)) = analyzers {
            e = e.apply(&Element::Waveplate { jones: Jones::onto_h(a.ket()), target: Spatial::A })?;
            e = e.apply(&Element::Waveplate { jones: Jones::onto_h(b.ket()), target: Spatial::Y })?;
        }
        Ok(e)
    };
    let base = ClickPattern::clicks(&["D_A", "D_Y"]);
    if !cfg.keep_dbar {
        return detect(&analyze(e, false)?, &base.with("D_X", true), &detectors);
    }
    let d = detect(&analyze(e, false)?, &base.clone().with("D_X", true).with("D_Xbar", false), &detectors)?;
    let dbar = detect(&analyze(e, true)?, &base.with("D_Xbar", true).with("D_X", false), &detectors)?;
    Ok(d + dbar)
}

struct Propagated {
    case: EmissionCase,
    ensemble: FockEnsemble,
}

fn propagate_all(cfg: &SetupConfig) -> Result<Vec<Propagated>> {
    cfg.validate()?;
    let src = &cfg.source;
    let pairs = spdc_terms(src.gamma, &src.pair, src.spdc_order, cfg.n_max)?;
    let ancillas = wcp_terms(src.nu, src.wcp_polarization, src.mode_overlap, src.wcp_order, cfg.n_max)?;
    cfg.emission_terms()
        .into_par_iter()
        .map(|(p, w)| {
            Ok(Propagated {
                case: EmissionCase::classify(p, w),
                ensemble: propagate(cfg, &pairs[p], &ancillas[w])?,
            })
        })
        .collect()
}

fn breakdown_of(cfg: &SetupConfig, terms: &[Propagated]) -> Result<BTreeMap<EmissionCase, f64>> {
    let mut out = BTreeMap::new();
    for case in [EmissionCase::SpdcWcp, EmissionCase::WcpWcp, EmissionCase::SpdcSpdc, EmissionCase::Other] {
        out.insert(case, 0.0);
    }
    for t in terms {
        *out.get_mut(&t.case).expect("all cases present") += threefold(cfg, &t.ensemble, None)?;
    }
    Ok(out)
}

/// Simulates the apparatus for every kept emission term and reconstructs
/// the (A, Y) state from threefold probabilities on the 16 tomography
/// settings, as the experiment does.
pub fn simulate_setup(cfg: &SetupConfig) -> Result<SetupResult> {
    let terms = propagate_all(cfg)?;
    let breakdown = breakdown_of(cfg, &terms)?;
    let threefold_probability = breakdown.values().sum();
    let settings = tomography_settings();
    let probs: Vec<f64> = settings
        .par_iter()
        .map(|s| {
            terms
                .iter()
                .map(|t| threefold(cfg, &t.ensemble, Some((s.a, s.b))))
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    let x = linear_from_values(&settings, &probs)?;
    let tr = x.trace().re;
    if tr <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let x = x / C64::new(tr, 0.0);
    let raw = DensityOperator::project_physical(&x)?;
    let (eigs, _) = crate::qmath::eig_hermitian_matrix(&x)?;
    let raw_min_eigenvalue = *eigs.last().expect("4 eigenvalues");
    let projected = raw_min_eigenvalue < -1e-12;
    let rho_ay = if projected { raw } else { DensityOperator::new(x)? };
    Ok(SetupResult {
        rho_ay,
        threefold_probability,
        breakdown,
        setting_probabilities: settings.into_iter().zip(probs).collect(),
        raw_min_eigenvalue,
        projected,
    })
}

/// Threefold probability per pulse attributed to each emission case.
pub fn multiphoton_budget(gamma: f64, nu: f64, eta: f64) -> Result<BTreeMap<EmissionCase, f64>> {
    let mut cfg = SetupConfig { eta, ..SetupConfig::default() };
    cfg.source.gamma = gamma;
    cfg.source.nu = nu;
    multiphoton_budget_for(&cfg)
}

pub fn multiphoton_budget_for(cfg: &SetupConfig) -> Result<BTreeMap<EmissionCase, f64>> {
    breakdown_of(cfg, &propagate_all(cfg)?)
}
