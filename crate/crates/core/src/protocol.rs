//! Qubit-layer DFS distribution: ancilla, transmission, parity sifting,
//! decoding measurement, and the unprotected baseline.
//!
//! Qubit order: the input state holds (spectators…, S). Encoding appends the
//! ancilla S′ as the last qubit. Sifting removes S′ and leaves the logical
//! qubit in S's slot, relabeled |0̃⟩ = |H⟩_S|V⟩_S′ → |H⟩ and
//! |1̃⟩ = |V⟩_S|H⟩_S′ → |V⟩. Decoding measures photon X and leaves Y in that
//! same slot.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::channels::{apply_channel, ChannelPhotonSet, DephasingSpec};
use crate::error::{Error, Result};
use crate::qmath::{
    apply_kraus, check_indices, DensityOperator, Operator, StateVector, Tensor, C64, CMatrix,
    TOL_CHANNEL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolInput {
    /// State over (spectators…, S); S is the last qubit.
    pub state: DensityOperator,
    pub channel_spec: DephasingSpec,
    /// Keep D̄ outcomes at X and apply the π-phase correction on Y.
    pub keep_dbar_branch: bool,
}

impl ProtocolInput {
    pub fn new(state: DensityOperator, channel_spec: DephasingSpec) -> Result<Self> {
        let input = Self { state, channel_spec, keep_dbar_branch: false };
        input.validate()?;
        Ok(input)
    }

    pub fn from_pure(psi: &StateVector, channel_spec: DephasingSpec) -> Result<Self> {
        Self::new(psi.to_density(), channel_spec)
    }

    pub fn keep_dbar(mut self, keep: bool) -> Self {
        self.keep_dbar_branch = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state.n_qubits().ok_or(Error::NotQubitDimension(self.state.dim()))?;
        if n == 0 {
            return Err(Error::InvalidParameter("input must contain the signal qubit".into()));
        }
        if (self.state.norm() - 1.0).abs() > TOL_CHANNEL {
            return Err(Error::InvalidTrace(self.state.norm()));
        }
        self.channel_spec.validate()
    }

    pub fn n_qubits(&self) -> usize {
        self.state.n_qubits().unwrap_or(0)
    }

    pub fn s_index(&self) -> usize {
        self.n_qubits() - 1
    }
}

/// Measurement branches of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    /// D outcome at X.
    D,
    /// D̄ outcome at X.
    DBar,
    /// Parity sifting rejected the event.
    SiftFail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    /// Normalized state over (spectators…, Y).
    pub state: DensityOperator,
    pub success_probability: f64,
    /// Absolute probability of every branch that was evaluated.
    pub branch_probabilities: BTreeMap<Branch, f64>,
    pub kept: Vec<Branch>,
}

/// (|H⟩_A|H⟩_S − |V⟩_A|V⟩_S)/√2
pub fn prepare_phi_minus() -> StateVector {
    StateVector::new(vec![
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-FRAC_1_SQRT_2, 0.0),
    ])
    .expect("normalized")
}

/// Ancilla S′ in |D⟩.
pub fn prepare_ancilla() -> StateVector {
    StateVector::d()
}

/// ρ ⊗ |D⟩⟨D|, ordered (…, S, S′).
pub fn encode_append(input: &ProtocolInput) -> DensityOperator {
    input.state.tensor(&prepare_ancilla().to_density())
}

/// Projects (S, S′) onto span{|HV⟩, |VH⟩} and relabels the surviving pair as
/// one qubit at S's position. Returns the sub-normalized conditional state and
/// its probability.
pub fn qpg_sift(
    rho: &DensityOperator,
    s_index: usize,
    sprime_index: usize,
) -> Result<(DensityOperator, f64)> {
    let n = rho.n_qubits().ok_or(Error::NotQubitDimension(rho.dim()))?;
    check_indices(&[s_index, sprime_index], n)?;
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let dim_out = 1usize << (n - 1);
    let mut k = CMatrix::zeros(dim_out, rho.dim());
    for i in 0..rho.dim() {
        if bit(i, s_index) != bit(i, sprime_index) {
            k[(remove_bit(i, sprime_index, n), i)] = C64::new(1.0, 0.0);
        }
    }
    let out = apply_kraus(rho, &[Operator::new(k)])?;
    let p = out.trace();
    Ok((out, p))
}

/// Measures photon X in {D, D̄}. `x_index` is the sifted logical qubit; the
/// parity-gate output maps it onto the photon pair |H⟩→|HH⟩_XY,
/// |V⟩→|VV⟩_XY before X is measured. Branch probabilities are absolute, so a
/// sub-normalized input carries its norm through.
pub fn decode(rho: &DensityOperator, x_index: usize, keep_dbar: bool) -> Result<ProtocolOutcome> {
    let n = rho.n_qubits().ok_or(Error::NotQubitDimension(rho.dim()))?;
    check_indices(&[x_index], n)?;

    let split = parity_gate_output(x_index, n);
    let d_branch = project_photon(&StateVector::d(), x_index, n + 1).matrix() * split.matrix();
    let dbar_proj = project_photon(&StateVector::dbar(), x_index, n + 1).matrix() * split.matrix();
    let correction = Operator::pauli_z().embed(&[x_index], n)?;
    let dbar_branch = correction.matrix() * dbar_proj;

    let on_d = apply_kraus(rho, &[Operator::new(d_branch)])?;
    let on_dbar = apply_kraus(rho, &[Operator::new(dbar_branch)])?;

    let mut branch_probabilities = BTreeMap::new();
    branch_probabilities.insert(Branch::D, on_d.trace());
    branch_probabilities.insert(Branch::DBar, on_dbar.trace());

    let mut kept = vec![Branch::D];
    let mut m = on_d.matrix().clone();
    if keep_dbar {
        kept.push(Branch::DBar);
        m += on_dbar.matrix();
    }
    let success_probability: f64 = kept.iter().map(|b| branch_probabilities[b]).sum();
    let state = DensityOperator::conditional(m)?.normalized()?;
    Ok(ProtocolOutcome { state, success_probability, branch_probabilities, kept })
}

/// Full protocol: append ancilla, send S and S′ through the channel, sift,
/// decode. When the channel dephases in a basis other than H/V, S and S′ are
/// mapped into that basis by local wave plates before the channel and back
/// afterwards.
pub fn distribute(input: &ProtocolInput) -> Result<ProtocolOutcome> {
    input.validate()?;
    let n = input.n_qubits();
    let (s, sp) = (n - 1, n);
    let mut encoded = encode_append(input);

    let frame = (!input.channel_spec.basis.is_linear())
        .then(|| {
            let w = input.channel_spec.basis.frame();
            w.embed(&[s], n + 1)?.compose(&w.embed(&[sp], n + 1)?)
        })
        .transpose()?;
    if let Some(w) = &frame {
        encoded = encoded.conjugate(w)?;
    }
    let mut received = apply_channel(&encoded, &ChannelPhotonSet::pair(s, sp)?, &input.channel_spec)?;
    if let Some(w) = &frame {
        received = received.conjugate(&w.adjoint())?;
    }

    let (sifted, p_sift) = qpg_sift(&received, s, sp)?;
    if p_sift <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let mut outcome = decode(&sifted, s, input.keep_dbar_branch)?;
    outcome
        .branch_probabilities
        .insert(Branch::SiftFail, input.state.norm() - p_sift);
    Ok(outcome)
}

/// No encoding: S alone crosses the channel.
pub fn baseline_direct(input: &ProtocolInput) -> Result<DensityOperator> {
    input.validate()?;
    apply_channel(&input.state, &ChannelPhotonSet::single(input.s_index()), &input.channel_spec)
}

fn remove_bit(idx: usize, q: usize, n: usize) -> usize {
    let shift = n - 1 - q;
    let high = idx >> (shift + 1);
    let low = idx & ((1 << shift) - 1);
    (high << shift) | low
}

/// Isometry from n qubits to n + 1: logical qubit at `x` becomes photons X
/// (at `x`) and Y (at `x + 1`) with equal polarization.
fn parity_gate_output(x: usize, n: usize) -> Operator {
    let mut m = CMatrix::zeros(1 << (n + 1), 1 << n);
    for i in 0..(1usize << n) {
        let shift = n - 1 - x;
        let b = (i >> shift) & 1;
        let high = i >> (shift + 1);
        let low = i & ((1 << shift) - 1);
        let out = (((high << 1 | b) << 1 | b) << shift) | low;
        m[(out, i)] = C64::new(1.0, 0.0);
    }
    Operator::new(m)
}

/// ⟨m|_q ⊗ I: contracts qubit `q` of an n-qubit space against |m⟩.
fn project_photon(m: &StateVector, q: usize, n: usize) -> Operator {
    let mut k = CMatrix::zeros(1 << (n - 1), 1 << n);
    for i in 0..(1usize << n) {
        let b = (i >> (n - 1 - q)) & 1;
        k[(remove_bit(i, q, n), i)] = m.amplitudes()[b].conj();
    }
    Operator::new(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::DephasingBasis;
    use crate::qmath::random::random_pure;
    use crate::qmath::{fidelity_with_pure, max_abs_diff, partial_trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn phi_plus() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn phi_minus_preparation() {
        let phi = prepare_phi_minus();
        let rho = phi.to_density();
        assert!((fidelity_with_pure(&rho, &phi).unwrap() - 1.0).abs() < 1e-15);
        let half = DensityOperator::maximally_mixed(2);
        for q in 0..2 {
            let r = partial_trace(&rho, &[q]).unwrap();
            assert!(max_abs_diff(r.matrix(), half.matrix()) < 1e-15);
        }
    }

    #[test]
    fn ancilla_is_diagonal_state() {
        let a = prepare_ancilla();
        for amp in a.amplitudes() {
            assert!((amp.re - FRAC_1_SQRT_2).abs() < 1e-15 && amp.im == 0.0);
        }
        assert!(a.inner(&StateVector::dbar()).unwrap().norm() < 1e-15);
        let out = apply_channel(&a.to_density(), &ChannelPhotonSet::single(0), &DephasingSpec::uniform())
            .unwrap();
        assert!(max_abs_diff(out.matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn encode_appends_ancilla() {
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), DephasingSpec::uniform()).unwrap();
        let enc = encode_append(&input);
        assert_eq!(enc.dim(), 8);
        assert!((enc.trace() - 1.0).abs() < 1e-15);
        let anc = partial_trace(&enc, &[2]).unwrap();
        assert!(max_abs_diff(anc.matrix(), prepare_ancilla().to_density().matrix()) < 1e-15);
        let sys = partial_trace(&enc, &[0, 1]).unwrap();
        assert!(max_abs_diff(sys.matrix(), input.state.matrix()) < 1e-15);
    }

    #[test]
    fn sift_on_encoded_bell_pair() {
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), DephasingSpec::uniform()).unwrap();
        let (out, p) = qpg_sift(&encode_append(&input), 1, 2).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((out.norm() - 0.5).abs() < 1e-15);
        let f = fidelity_with_pure(&out.normalized().unwrap(), &prepare_phi_minus()).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sift_edge_cases() {
        let hh = StateVector::h().tensor(&StateVector::h()).to_density();
        let (_, p) = qpg_sift(&hh, 0, 1).unwrap();
        assert_eq!(p, 0.0);
        let (_, p) = qpg_sift(&DensityOperator::maximally_mixed(4), 0, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(matches!(qpg_sift(&hh, 1, 1), Err(Error::DuplicateQubit(1))));
        assert!(matches!(qpg_sift(&hh, 0, 2), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn decode_branches() {
        let ideal = prepare_phi_minus().to_density();
        let out = decode(&ideal, 1, false).unwrap();
        assert!((out.branch_probabilities[&Branch::D] - 0.5).abs() < 1e-15);
        assert!((out.success_probability - 0.5).abs() < 1e-15);
        assert!(max_abs_diff(out.state.matrix(), ideal.matrix()) < 1e-15);

        let both = decode(&ideal, 1, true).unwrap();
        assert!((both.success_probability - 1.0).abs() < 1e-15);
        assert!(max_abs_diff(both.state.matrix(), ideal.matrix()) < 1e-15);
    }

    #[test]
    fn dbar_branch_needs_the_phase_flip() {
        // Without correction the D̄ branch leaves |φ⁺⟩; Z on Y maps it back.
        let ideal = prepare_phi_minus().to_density();
        let split = parity_gate_output(1, 2);
        let raw = project_photon(&StateVector::dbar(), 1, 3).matrix() * split.matrix();
        let uncorrected = apply_kraus(&ideal, &[Operator::new(raw)]).unwrap().normalized().unwrap();
        assert!((fidelity_with_pure(&uncorrected, &phi_plus()).unwrap() - 1.0).abs() < 1e-14);
        let z = Operator::pauli_z().embed(&[1], 2).unwrap();
        let fixed = uncorrected.conjugate(&z).unwrap();
        assert!((fidelity_with_pure(&fixed, &prepare_phi_minus()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distribute_ideal_bell_pair() {
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), DephasingSpec::uniform()).unwrap();
        let out = distribute(&input).unwrap();
        assert!((fidelity_with_pure(&out.state, &prepare_phi_minus()).unwrap() - 1.0).abs() < 1e-12);
        assert!((out.success_probability - 0.25).abs() < 1e-12);
        let total: f64 = out.branch_probabilities.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribute_with_jitter() {
        let spec = DephasingSpec::uniform().with_delta_sigma(0.5);
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), spec).unwrap();
        let out = distribute(&input).unwrap();
        let f = fidelity_with_pure(&out.state, &prepare_phi_minus()).unwrap();
        assert!((f - (1.0 + (-0.125f64).exp()) / 2.0).abs() < 1e-12);
        assert!((f - 0.941).abs() < 1e-3);
    }

    #[test]
    fn distribute_single_qubit_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let psi = random_pure(2, &mut rng);
            let input = ProtocolInput::from_pure(&psi, DephasingSpec::uniform()).unwrap();
            let out = distribute(&input).unwrap();
            assert!((fidelity_with_pure(&out.state, &psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distribute_in_circular_frame() {
        let spec = DephasingSpec::gaussian(0.3, 1.2).with_basis(DephasingBasis::circular());
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), spec).unwrap();
        let out = distribute(&input).unwrap();
        assert!((fidelity_with_pure(&out.state, &prepare_phi_minus()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_examples() {
        let input = ProtocolInput::from_pure(&prepare_phi_minus(), DephasingSpec::uniform()).unwrap();
        let out = baseline_direct(&input).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        expect[(0, 0)] = C64::new(0.5, 0.0);
        expect[(3, 3)] = C64::new(0.5, 0.0);
        assert!(max_abs_diff(out.matrix(), &expect) < 1e-15);
        assert!((fidelity_with_pure(&out, &prepare_phi_minus()).unwrap() - 0.5).abs() < 1e-15);

        let calm = ProtocolInput::from_pure(&prepare_phi_minus(), DephasingSpec::gaussian(0.0, 0.0))
            .unwrap();
        let out = baseline_direct(&calm).unwrap();
        assert!(max_abs_diff(out.matrix(), calm.state.matrix()) < 1e-15);
    }

    #[test]
    fn input_validation() {
        let sub = DensityOperator::conditional(CMatrix::identity(2, 2) * C64::new(0.25, 0.0)).unwrap();
        assert!(ProtocolInput::new(sub, DephasingSpec::uniform()).is_err());
    }
}
