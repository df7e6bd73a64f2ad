//! Truncated Fock-space model of the apparatus: photon sources, linear
//! optics, loss, collective phase noise, and threshold detection with
//! time-bin coincidence windows.
//!
//! States are sparse maps from occupied-mode multisets to amplitudes. Phase
//! noise turns a pure state into a [`FockEnsemble`]; loss is carried as a
//! purification into reservoir modes that detection never sees.

mod detect;
mod elements;
mod ensemble;
mod setup;
mod sources;
mod state;

pub use detect::{detect, ClickPattern, Detector, DetectorSpec};
pub use elements::{apply_element, attenuate, Element, Jones};
pub use ensemble::{dephase, FockEnsemble};
pub use setup::{
    multiphoton_budget, multiphoton_budget_for, simulate_setup, EmissionCase, SetupConfig, SetupResult,
    GROUP_DELAY_BINS, LONG_ARM_BINS,
};
pub use sources::{
    build_spdc, build_wcp, mean_photon_number, spdc_terms, wcp_terms, PairAmplitudes, SourceSpec,
    EARLY_BIN, LATE_BIN,
};
pub use state::{FockState, ModeIndex, Occupation, Pol, Spatial, DEFAULT_N_MAX};
