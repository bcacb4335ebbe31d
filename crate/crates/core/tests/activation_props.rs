mod common;

use common::*;
use pe_core::activation::{
    activate, activate_pure, activation_unitary, array_coefficients, balanced_sector_probability, decide_particle_separable,
    extraction_bound_check, fock_activation_amplitudes, local_filter_relation_check, m_pe_from_activation, ActivationBudget,
    ActivationSpec,
};
use pe_core::fock_core::{dephase_local, FockBasis, PureSectorState};
use pe_core::linalg::{c, CMat, CVec};
use pe_core::linear_optics::{BeamSplitterArray, ModeUnitary};
use pe_core::{BlockDiagonalState, ModePartition};
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn closed_form_matches_permanents(seed in any::<u64>(), n0 in 0usize..4, n1 in 0usize..3) {
        let mut r = rng(seed);
        let n = [n0, n1];
        let array = BeamSplitterArray::new(vec![r.gen_range(0.05..0.95), r.gen_range(0.05..0.95)]).unwrap();
        let u = activation_unitary(&ActivationSpec::new(BlockDiagonalState::fock(&n).unwrap(), ModeUnitary::identity(2), array.clone()).unwrap());
        let input = [n0, n1, 0, 0];
        let total = n0 + n1;
        for n_a in 0..=total {
            for (parties, amp) in fock_activation_amplitudes(&n, &array_coefficients(&array), &[n_a, total - n_a]).unwrap() {
                let out: Vec<usize> = parties[0].iter().chain(&parties[1]).copied().collect();
                prop_assert!((lifted_amplitude(u.matrix(), &out, &input) - amp).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rotated_activation_matches_permanents(seed in any::<u64>()) {
        let mut r = rng(seed);
        let va = ModeUnitary::random(2, &mut r);
        let array = BeamSplitterArray::new(vec![r.gen_range(0.05..0.95), r.gen_range(0.05..0.95)]).unwrap();
        let input = PureSectorState::fock(&[2, 1]).unwrap();
        let out = activate_pure(&input, &va, &array).unwrap();
        let u = activation_unitary(&ActivationSpec::new(input.to_state(), va, array).unwrap());
        for occ in out.basis().states() {
            prop_assert!((out.amplitude(occ) - lifted_amplitude(u.matrix(), occ, &[2, 1, 0, 0])).norm() < 1e-10);
        }
    }

    #[test]
    fn balanced_sector_probabilities_follow_the_binomial_law(n0 in 0usize..4, n1 in 0usize..3) {
        let rep = activate(&ActivationSpec::balanced(BlockDiagonalState::fock(&[n0, n1]).unwrap()).unwrap()).unwrap();
        let total = n0 + n1;
        let mut sum = 0.0;
        for n_a in 0..=total {
            let got = rep.sectors.iter().find(|s| s.n_a == n_a).map(|s| s.probability).unwrap_or(0.0);
            // total particles split binomially regardless of how they sit in the input modes
            let law = binomial(total, n_a) as f64 / 2f64.powi(total as i32);
            prop_assert!((got - balanced_sector_probability(&[n0, n1], n_a)).abs() < 1e-12);
            prop_assert!((got - law).abs() < 1e-12);
            sum += got;
        }
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_dephasing_commutes_with_number_dephasing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = 2;
        let n_max = 2;
        // superposition over sectors N = 0..=2, held as a dense vector per sector
        let sectors: Vec<Vec<Vec<usize>>> = (0..=n_max).map(|n| FockBasis::new(m, n).unwrap().states().to_vec()).collect();
        let mut amps: Vec<CVec> = sectors.iter().map(|s| random_direction(&mut r, s.len())).collect();
        let weights: Vec<f64> = (0..=n_max).map(|_| r.gen_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (a, w) in amps.iter_mut().zip(&weights) {
            *a *= c((w / total).sqrt(), 0.0);
        }
        let array = BeamSplitterArray::new(vec![r.gen_range(0.1..0.9), r.gen_range(0.1..0.9)]).unwrap();
        let va = ModeUnitary::random(m, &mut r);

        let dephased_input = BlockDiagonalState::new(
            m,
            (0..=n_max).map(|n| (n, weights[n] / total, &amps[n] * amps[n].adjoint() / c(amps[n].norm_squared(), 0.0))).collect(),
        )
        .unwrap();
        let spec = ActivationSpec::new(dephased_input, va, array).unwrap();
        let u = activation_unitary(&spec);
        let p = ModePartition::halves(m);
        let lib = dephase_local(&activate(&spec).unwrap().output, &p).unwrap();

        // dense oracle: activate the coherent superposition, then keep only entries with matching local numbers
        let out_states: Vec<Vec<usize>> = (0..=n_max).flat_map(|n| FockBasis::new(2 * m, n).unwrap().states().to_vec()).collect();
        let psi_out: Vec<_> = out_states
            .iter()
            .map(|o| {
                let n: usize = o.iter().sum();
                sectors[n]
                    .iter()
                    .zip(amps[n].iter())
                    .map(|(inp, a)| {
                        let mut ext = inp.clone();
                        ext.resize(2 * m, 0);
                        lifted_amplitude(u.matrix(), o, &ext) * a
                    })
                    .sum::<pe_core::linalg::C64>()
            })
            .collect();
        let side = |o: &Vec<usize>| (o[..m].iter().sum::<usize>(), o[m..].iter().sum::<usize>());
        for n in 0..=n_max {
            let basis = FockBasis::new(2 * m, n).unwrap();
            let got = lib.block(n).map(|b| &b.rho * c(b.weight, 0.0)).unwrap_or_else(|| CMat::zeros(basis.len(), basis.len()));
            for (i, oi) in out_states.iter().enumerate() {
                for (j, oj) in out_states.iter().enumerate() {
                    if oi.iter().sum::<usize>() != n || oj.iter().sum::<usize>() != n {
                        continue;
                    }
                    let expected = if side(oi) == side(oj) { psi_out[i] * psi_out[j].conj() } else { c(0.0, 0.0) };
                    let (bi, bj) = (basis.index_of(oi).unwrap(), basis.index_of(oj).unwrap());
                    prop_assert!((got[(bi, bj)] - expected).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn local_filters_relate_general_and_balanced_arrays(seed in any::<u64>(), n0 in 0usize..4, n1 in 0usize..3) {
        let mut r = rng(seed);
        let rv = vec![r.gen_range(0.05..0.95), r.gen_range(0.05..0.95)];
        let f = local_filter_relation_check(&[n0, n1], &rv).unwrap();
        prop_assert!(f.holds && f.max_deviation < 1e-9);
    }

    #[test]
    fn extracted_entanglement_stays_below_candidate_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_sector_state(&mut r, 2, 2);
        let rep = extraction_bound_check(&ActivationSpec::balanced(s).unwrap(), 16, seed).unwrap();
        prop_assert!(rep.consistent);
        prop_assert!(rep.e_ssr_lower_bound <= rep.m_pe_upper_bound + 1e-9);
    }
}

#[test]
fn particle_separability_decisions() {
    assert_eq!(decide_particle_separable(&BlockDiagonalState::fock(&[1, 1]).unwrap()), Some(false));
    assert_eq!(decide_particle_separable(&BlockDiagonalState::fock(&[2, 0]).unwrap()), Some(true));
    assert_eq!(decide_particle_separable(&BlockDiagonalState::vacuum(2)), Some(true));
}

#[test]
fn one_particle_is_never_activated() {
    // any array, any rotation: a single particle only produces mode entanglement
    let mut r = rng(5);
    for _ in 0..20 {
        let va = ModeUnitary::random(2, &mut r);
        let array = BeamSplitterArray::new(vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).unwrap();
        let spec = ActivationSpec::new(BlockDiagonalState::fock(&[1, 0]).unwrap(), va, array).unwrap();
        assert!(activate(&spec).unwrap().e_ssr_negativity < 1e-12);
    }
}

#[test]
fn activation_search_finds_at_least_the_balanced_value() {
    let s = BlockDiagonalState::fock(&[1, 1]).unwrap();
    let balanced = activate(&ActivationSpec::balanced(s.clone()).unwrap()).unwrap().e_ssr_negativity;
    let found = m_pe_from_activation(&s, ActivationBudget { rotations: 2, sweeps: 1 }, 3).unwrap();
    assert!(found.value >= balanced - 1e-12);
    assert_eq!(found.reflectivities.len(), 2);
}
