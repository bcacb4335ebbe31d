mod common;

use common::*;
use pe_core::activation::{activate, ActivationSpec};
use pe_core::fock_core::{dephase_local, FockBasis};
use pe_core::linalg::{c, random_density, random_hermitian, CMat};
use pe_core::linear_optics::{append_vacuum, apply_mode_unitary, measure_destructive, ModeUnitary, TruncatedFockOperator};
use pe_core::measures::{
    collective_generator, e_ssr, m_pe_f, m_pe_f_ensemble, mpe_objective, negativity, qfi, qfi_dense, variance_dense, Axis,
    MpeSearch, SingleParticleObservable, SsrMeasure,
};
use pe_core::resource_states::{coherent_spin_state, noon_state, random_particle_separable, CoherentSpinSpec};
use pe_core::{BlockDiagonalState, ModePartition};
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn two_mode_value(s: &BlockDiagonalState) -> f64 {
    m_pe_f(s, MpeSearch::TwoModeExact).unwrap().value
}

/// Local passive unitary u_A ⊕ u_B on a split of the modes.
fn local_unitary<R: Rng>(r: &mut R, ma: usize, mb: usize) -> ModeUnitary {
    ModeUnitary::random(ma, r).direct_sum(&ModeUnitary::random(mb, r))
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn spectral_fisher_information_matches_oracle(seed in any::<u64>(), d in 1usize..12) {
        let mut r = rng(seed);
        let rank = r.gen_range(1..=d);
        let rho = random_density(d, rank, &mut r);
        let h = random_hermitian(d, &mut r);
        prop_assert!((qfi_dense(&rho, &h) - qfi_oracle(&rho, &h)).abs() < 1e-9);
        prop_assert!((variance_dense(&rho, &h) - variance_oracle(&rho, &h)).abs() < 1e-10);
    }

    #[test]
    fn pure_state_fisher_information_is_four_variances(seed in any::<u64>(), d in 1usize..12) {
        let mut r = rng(seed);
        let rho = random_density(d, 1, &mut r);
        let h = random_hermitian(d, &mut r);
        prop_assert!((qfi_dense(&rho, &h) - 4.0 * variance_oracle(&rho, &h)).abs() < 1e-9);
    }

    #[test]
    fn fisher_information_is_convex(seed in any::<u64>(), d in 2usize..10, p in 0.0f64..1.0) {
        let mut r = rng(seed);
        let a = random_density(d, r.gen_range(1..=d), &mut r);
        let b = random_density(d, r.gen_range(1..=d), &mut r);
        let h = random_hermitian(d, &mut r);
        let mix = &a * c(p, 0.0) + &b * c(1.0 - p, 0.0);
        prop_assert!(qfi_dense(&mix, &h) <= p * qfi_dense(&a, &h) + (1.0 - p) * qfi_dense(&b, &h) + 1e-9);
    }

    #[test]
    fn projector_split_of_fisher_information(seed in any::<u64>(), d in 2usize..20) {
        let mut r = rng(seed);
        let k = r.gen_range(1..=d);
        let w = pe_core::linalg::random_unitary(d, &mut r);
        let wk = w.columns(0, k).into_owned();
        let pi = &wk * wk.adjoint();
        let rho = &wk * random_density(k, r.gen_range(1..=k), &mut r) * wk.adjoint();
        let h = random_hermitian(d, &mut r);
        let ph = &pi * &h * &pi;
        let rhs = qfi_oracle(&rho, &ph) + 4.0 * variance_oracle(&rho, &h) - 4.0 * variance_oracle(&rho, &ph);
        prop_assert!((qfi_dense(&rho, &h) - rhs).abs() < 1e-8);
    }

    #[test]
    fn separable_states_have_no_metrological_gain(seed in any::<u64>(), n in 1usize..5, k in 1usize..4) {
        let s = random_particle_separable(2, n, k, seed).unwrap();
        prop_assert!(two_mode_value(&s) < 1e-6);
    }

    #[test]
    fn objective_matches_first_quantized_oracle(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU) {
        // two particles: F − 4V computed on explicit qubits
        let mut r = rng(seed);
        let s = random_sector_state(&mut r, 2, 2);
        let h = SingleParticleObservable::bloch(theta, phi);
        let basis = FockBasis::new(2, 2).unwrap();
        let iso = pe_core::fock_core::first_quantized_isometry(&basis);
        let rho = s.block(2).unwrap().rho.clone();
        let big_rho = &iso * &rho * iso.adjoint();
        let one = CMat::identity(2, 2);
        let hm = h.matrix();
        let big_h = (pe_core::linalg::kron(hm, &one) + pe_core::linalg::kron(&one, hm)) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho1 = CMat::from_fn(2, 2, |i, j| big_rho[(2 * i, 2 * j)] + big_rho[(2 * i + 1, 2 * j + 1)]);
        let oracle = qfi_oracle(&big_rho, &big_h) - 4.0 * variance_oracle(&rho1, hm);
        prop_assert!((mpe_objective(&s, &h).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn mode_unitaries_leave_the_monotone_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_state(&mut r, 2, 3);
        let u = ModeUnitary::random(2, &mut r);
        let moved = apply_mode_unitary(&s, &u).unwrap();
        prop_assert!((two_mode_value(&s) - two_mode_value(&moved)).abs() < 1e-8);
    }

    #[test]
    fn vacuum_append_leaves_the_monotone_unchanged(seed in any::<u64>()) {
        let s = random_state(&mut rng(seed), 2, 2);
        let ext = append_vacuum(&s, 1).unwrap();
        let v = m_pe_f(&ext, MpeSearch::GeneralRestarts { seed, restarts: 16 }).unwrap().value;
        prop_assert!((two_mode_value(&s) - v).abs() < 1e-8);
    }

    #[test]
    fn ssr_negativity_equals_negativity_of_dephased_state(seed in any::<u64>(), modes in 2usize..5) {
        let s = random_state(&mut rng(seed), modes, if modes > 3 { 2 } else { 3 });
        let p = ModePartition::new((0..modes / 2).collect(), (modes / 2..modes).collect()).unwrap();
        let direct = e_ssr(&s, &p, SsrMeasure::Negativity).unwrap();
        let dual = negativity(&dephase_local(&s, &p).unwrap(), &p).unwrap();
        prop_assert!((direct - dual).abs() < 1e-10);
    }

    #[test]
    fn ssr_negativity_ignores_local_passive_unitaries(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_state(&mut r, 4, 2);
        let p = ModePartition::halves(2);
        let moved = apply_mode_unitary(&s, &local_unitary(&mut r, 2, 2)).unwrap();
        let a = e_ssr(&s, &p, SsrMeasure::Negativity).unwrap();
        let b = e_ssr(&moved, &p, SsrMeasure::Negativity).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>(), modes in 1usize..4) {
        let s = random_state(&mut rng(seed), modes, 2);
        let back = BlockDiagonalState::from_json(&s.to_json().unwrap()).unwrap();
        prop_assert_eq!(s, back);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn destructive_measurement_does_not_raise_the_monotone(seed in any::<u64>()) {
        // two system modes and one ancilla mode measured destructively, one round averaged over outcomes
        let mut r = rng(seed);
        let s = random_state(&mut r, 3, 2);
        let p = ModePartition::new(vec![0, 1], vec![2]).unwrap();
        let povm: Vec<TruncatedFockOperator> = {
            let w: Vec<f64> = (0..=2).map(|_| r.gen_range(0.1..0.9)).collect();
            let first: Vec<CMat> = w.iter().map(|&x| CMat::from_element(1, 1, c(x, 0.0))).collect();
            let second: Vec<CMat> = w.iter().map(|&x| CMat::from_element(1, 1, c(1.0 - x, 0.0))).collect();
            vec![
                TruncatedFockOperator::from_number_blocks(1, &first).unwrap(),
                TruncatedFockOperator::from_number_blocks(1, &second).unwrap(),
            ]
        };
        let ensemble: Vec<(f64, BlockDiagonalState)> = measure_destructive(&s, &p, &povm)
            .unwrap()
            .into_iter()
            .filter_map(|o| o.post_state.map(|st| (o.probability, st)))
            .collect();
        let after = m_pe_f_ensemble(&ensemble, MpeSearch::TwoModeExact).unwrap().value;
        let before = m_pe_f(&s, MpeSearch::GeneralRestarts { seed, restarts: 48 }).unwrap().value;
        prop_assert!(after <= before + 1e-7, "after {} before {}", after, before);
    }
}

#[test]
fn collective_generator_examples() {
    let g = collective_generator(&SingleParticleObservable::pauli(Axis::Z), 2);
    let b1 = g.block(1).unwrap();
    assert_eq!(b1[(0, 0)], c(1.0, 0.0));
    assert_eq!(b1[(1, 1)], c(-1.0, 0.0));
    let b2 = g.block(2).unwrap();
    let r2 = std::f64::consts::SQRT_2;
    for (i, v) in [2.0 / r2, 0.0, -2.0 / r2].iter().enumerate() {
        assert!((b2[(i, i)].re - v).abs() < 1e-12);
    }
    let id = SingleParticleObservable::new(CMat::identity(2, 2)).unwrap();
    let gi = collective_generator(&id, 3);
    assert!((gi.block(3).unwrap()[(0, 0)].re - 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn noon_monotone_matches_grid_oracle() {
    let noon = noon_state(2).unwrap().to_state();
    let v = two_mode_value(&noon);
    assert!((v - noon2_bloch_grid_oracle(90, 180)).abs() < 1e-4);
    assert!((v - 4.0).abs() < 1e-10);
    let g = collective_generator(&SingleParticleObservable::pauli(Axis::Z), 2);
    assert!((qfi(&noon, &g).unwrap() - 8.0).abs() < 1e-12);
}

#[test]
fn ssr_variants_vanish_together_on_pure_activations() {
    let mut r = rng(77);
    let mut inputs = vec![
        BlockDiagonalState::fock(&[1, 1]).unwrap(),
        BlockDiagonalState::fock(&[2, 0]).unwrap(),
        BlockDiagonalState::fock(&[2, 2]).unwrap(),
        noon_state(3).unwrap().to_state(),
    ];
    for n in 1..=3 {
        inputs.push(coherent_spin_state(&CoherentSpinSpec::new(random_direction(&mut r, 2), n).unwrap()).to_state());
    }
    for s in inputs {
        let rep = activate(&ActivationSpec::balanced(s).unwrap()).unwrap();
        let neg = rep.e_ssr_negativity;
        let ent = rep.e_ssr_entropy.expect("pure sectors");
        assert_eq!(neg > 1e-9, ent > 1e-9, "negativity {neg} entropy {ent}");
    }
}
