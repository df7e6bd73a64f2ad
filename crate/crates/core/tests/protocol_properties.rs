use dfs_core::analysis::entanglement_of_formation;
use dfs_core::channels::{DephasingBasis, DephasingSpec};
use dfs_core::protocol::{distribute, Branch, ProtocolInput};
use dfs_core::qmath::random::{random_density, random_pure, random_unitary};
use dfs_core::qmath::{fidelity_with_pure, trace_distance, Operator, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn collective_specs() -> Vec<DephasingSpec> {
    vec![
        DephasingSpec::uniform(),
        DephasingSpec::gaussian(0.4, 1.2),
        DephasingSpec::uniform().with_basis(DephasingBasis::circular()),
        DephasingSpec::gaussian(-1.0, 0.3).with_basis(DephasingBasis::circular()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn output_matches_any_pure_input(seed in any::<u64>(), spec_index in 0usize..4, keep in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_pure(4, &mut rng);
        let spec = collective_specs()[spec_index];
        let out = distribute(&ProtocolInput::from_pure(&psi, spec).unwrap().keep_dbar(keep)).unwrap();
        prop_assert!((fidelity_with_pure(&out.state, &psi).unwrap() - 1.0).abs() < 1e-10);
        let expected = if keep { 0.5 } else { 0.25 };
        prop_assert!((out.success_probability - expected).abs() < 1e-10);
    }

    #[test]
    fn entanglement_survives_collective_noise(seed in any::<u64>(), spec_index in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(4, &mut rng);
        let input = ProtocolInput::new(rho.clone(), collective_specs()[spec_index]).unwrap();
        let out = distribute(&input).unwrap();
        let before = entanglement_of_formation(&rho).unwrap();
        let after = entanglement_of_formation(&out.state).unwrap();
        prop_assert!((before - after).abs() < 1e-8);
    }

    #[test]
    fn branches_sum_to_one(seed in any::<u64>(), sigma_delta in 0.0f64..2.0, keep in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(4, &mut rng);
        let spec = DephasingSpec::gaussian(0.0, 0.8).with_delta_sigma(sigma_delta);
        let out = distribute(&ProtocolInput::new(rho, spec).unwrap().keep_dbar(keep)).unwrap();
        let total: f64 = [Branch::D, Branch::DBar, Branch::SiftFail]
            .iter()
            .map(|b| out.branch_probabilities[b])
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let kept: f64 = out.kept.iter().map(|b| out.branch_probabilities[b]).sum();
        prop_assert!((out.success_probability - kept).abs() < 1e-10);
    }

    #[test]
    fn local_unitaries_on_the_spectator_commute(seed in any::<u64>(), sigma_delta in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(4, &mut rng);
        let u = random_unitary(2, &mut rng).tensor(&Operator::identity(2));
        let spec = DephasingSpec::gaussian(0.3, 0.5).with_delta_sigma(sigma_delta);
        let rotated_first = distribute(&ProtocolInput::new(rho.conjugate(&u).unwrap(), spec).unwrap()).unwrap();
        let rotated_after = distribute(&ProtocolInput::new(rho, spec).unwrap()).unwrap().state.conjugate(&u).unwrap();
        prop_assert!(trace_distance(&rotated_first.state, &rotated_after).unwrap() < 1e-10);
    }
}

#[test]
fn three_spectators() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let psi = random_pure(16, &mut rng);
    let out = distribute(&ProtocolInput::from_pure(&psi, DephasingSpec::uniform()).unwrap()).unwrap();
    assert!((fidelity_with_pure(&out.state, &psi).unwrap() - 1.0).abs() < 1e-10);
    assert!((out.success_probability - 0.25).abs() < 1e-10);
}
