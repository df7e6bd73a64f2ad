//! Simulation of photonic entanglement distribution through a collectively
//! dephasing channel using a probabilistic decoherence-free-subspace encoding.
//!
//! Two layers share one set of conventions:
//!
//! * the qubit layer ([`qmath`], [`channels`], [`protocol`]) treats photons as
//!   polarization qubits and runs the encode / sift / decode protocol on dense
//!   density operators;
//! * the optics layer ([`fock`]) simulates the apparatus in a truncated Fock
//!   space with realistic sources, loss, routing, and threshold detection.
//!
//! [`analysis`] turns states and simulated counts into the reported
//! statistics: CHSH, tomography, concurrence, and delay-scan fits.

pub mod analysis;
pub mod error;
pub mod fock;
pub mod channels;
pub mod protocol;
pub mod qmath;

pub use error::{Error, Result};
