//! Activation of particle entanglement: vacuum append, beam-splitter array, local-number
//! sector analysis, closed-form Fock amplitudes and the related consistency checks.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock_core::{
    binomial, factorial, project_local_number, BlockDiagonalState, FockBasis, Limits, ModePartition, PureSectorState,
    SectorDecomposition,
};
use crate::linalg::{c, C64, CVec};
use crate::linear_optics::{append_vacuum_with, apply_mode_unitary, beam_splitter_unitary, lift_on_basis, BeamSplitterArray, ModeUnitary};
use crate::measures::{distance_to_candidate_set, separable_distance_lower_bound, PURE_SECTOR_TOL};
use crate::resource_states::{is_coherent_spin_pure, is_particle_separable_two_qubit, random_particle_separable};

/// Threshold above which an activated state counts as SSR-entangled.
pub const ENTANGLED_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ActivationSpec {
    input: BlockDiagonalState,
    pre_rotation: ModeUnitary,
    array: BeamSplitterArray,
    limits: Limits,
}

impl ActivationSpec {
    /// Checked against the default limits.
    pub fn new(input: BlockDiagonalState, pre_rotation: ModeUnitary, array: BeamSplitterArray) -> Result<Self> {
        Self::with_limits(input, pre_rotation, array, Limits::default())
    }

    pub fn with_limits(input: BlockDiagonalState, pre_rotation: ModeUnitary, array: BeamSplitterArray, limits: Limits) -> Result<Self> {
        let m = input.modes();
        if pre_rotation.modes() != m || array.len() != m {
            return Err(Error::Dimension(format!(
                "input has {m} modes, rotation {} and array {}",
                pre_rotation.modes(),
                array.len()
            )));
        }
        limits.check(2 * m, input.max_particles())?;
        Ok(Self { input, pre_rotation, array, limits })
    }

    /// No pre-rotation, balanced array.
    pub fn balanced(input: BlockDiagonalState) -> Result<Self> {
        Self::balanced_with_limits(input, Limits::default())
    }

    pub fn balanced_with_limits(input: BlockDiagonalState, limits: Limits) -> Result<Self> {
        let m = input.modes();
        Self::with_limits(input, ModeUnitary::identity(m), BeamSplitterArray::balanced(m), limits)
    }

    pub fn input(&self) -> &BlockDiagonalState {
        &self.input
    }

    pub fn pre_rotation(&self) -> &ModeUnitary {
        &self.pre_rotation
    }

    pub fn array(&self) -> &BeamSplitterArray {
        &self.array
    }
}

/// U_D · (V_A ⊕ 1) on 2m modes.
pub fn activation_unitary(spec: &ActivationSpec) -> ModeUnitary {
    let m = spec.input.modes();
    let pre = spec.pre_rotation.direct_sum(&ModeUnitary::identity(m));
    beam_splitter_unitary(&spec.array).compose(&pre).expect("matching dimensions")
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportTerm {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorReport {
    pub n_a: usize,
    pub n_b: usize,
    pub probability: f64,
    pub purity: f64,
    /// Squared Schmidt coefficients; only for pure sectors.
    pub schmidt_spectrum: Option<Vec<f64>>,
    pub negativity: f64,
    pub entropy: Option<f64>,
    /// Product basis states with diagonal weight above 1e-12.
    pub support: Vec<SupportTerm>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub ssr_entangled: bool,
    /// Some when particle-separability of the input is decidable at this size.
    pub input_particle_separable: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ActivationReport {
    pub output: BlockDiagonalState,
    pub partition: ModePartition,
    pub sectors: Vec<SectorReport>,
    pub e_ssr_negativity: f64,
    /// Sectorwise entropy variant, present when every sector is pure.
    pub e_ssr_entropy: Option<f64>,
    pub verdict: Verdict,
    pub postselected: Option<SectorReport>,
    #[serde(skip)]
    pub decomposition: SectorDecomposition,
}

fn sector_report(dec: &SectorDecomposition, key: (usize, usize)) -> SectorReport {
    let e = &dec.entries[&key];
    let s = &e.state;
    let pure = s.is_pure(PURE_SECTOR_TOL);
    let db = s.dim_b();
    let support = (0..s.rho.nrows())
        .filter(|&k| s.rho[(k, k)].re > 1e-12)
        .map(|k| SupportTerm {
            a: s.basis_a.state(k / db).to_vec(),
            b: s.basis_b.state(k % db).to_vec(),
            weight: s.rho[(k, k)].re,
        })
        .collect();
    SectorReport {
        n_a: key.0,
        n_b: key.1,
        probability: e.probability,
        purity: s.purity(),
        schmidt_spectrum: pure.then(|| s.schmidt_spectrum()),
        negativity: s.negativity(),
        entropy: pure.then(|| s.entanglement_entropy()),
        support,
    }
}

/// Particle-separability of a number-diagonal state where it is decidable. The state is free
/// iff every number block is; a pure block is free iff it is a coherent spin state, and mixed
/// blocks are decided only for two modes and two particles.
pub fn decide_particle_separable(state: &BlockDiagonalState) -> Option<bool> {
    let mut undecided = false;
    for b in state.blocks() {
        let free = if b.particles < 2 {
            true
        } else if let Some(p) = BlockDiagonalState::new(state.modes(), vec![(b.particles, 1.0, b.rho.clone())])
            .ok()
            .and_then(|s| s.as_pure(1e-12))
        {
            is_coherent_spin_pure(&p, 1e-10).ok()?
        } else if state.modes() == 2 && b.particles == 2 {
            is_particle_separable_two_qubit(2, 2, &b.rho).ok()?
        } else {
            undecided = true;
            continue;
        };
        if !free {
            return Some(false);
        }
    }
    (!undecided).then_some(true)
}

pub fn activate(spec: &ActivationSpec) -> Result<ActivationReport> {
    activate_postselect(spec, None)
}

/// Activation with an optional (N_A, N_B) conditioning reported alongside the full output.
pub fn activate_postselect(spec: &ActivationSpec, postselect: Option<(usize, usize)>) -> Result<ActivationReport> {
    let m = spec.input.modes();
    let appended = append_vacuum_with(&spec.input, m, &spec.limits)?;
    let output = apply_mode_unitary(&appended, &activation_unitary(spec))?;
    let partition = ModePartition::halves(m);
    let decomposition = project_local_number(&output, &partition)?;
    let sectors: Vec<SectorReport> = decomposition.entries.keys().map(|&k| sector_report(&decomposition, k)).collect();
    let e_ssr_negativity = sectors.iter().map(|s| s.probability * s.negativity).sum();
    let e_ssr_entropy = sectors
        .iter()
        .map(|s| s.entropy.map(|e| s.probability * e))
        .sum::<Option<f64>>();
    let postselected = match postselect {
        None => None,
        Some(key) => {
            if !decomposition.entries.contains_key(&key) {
                return invalid(format!("sector ({},{}) has zero probability", key.0, key.1));
            }
            Some(sector_report(&decomposition, key))
        }
    };
    Ok(ActivationReport {
        verdict: Verdict {
            ssr_entangled: e_ssr_negativity > ENTANGLED_TOL,
            input_particle_separable: decide_particle_separable(&spec.input),
        },
        output,
        partition,
        sectors,
        e_ssr_negativity,
        e_ssr_entropy,
        postselected,
        decomposition,
    })
}

/// Activated pure state on 2m modes.
pub fn activate_pure(input: &PureSectorState, pre_rotation: &ModeUnitary, array: &BeamSplitterArray) -> Result<PureSectorState> {
    let m = input.modes();
    if pre_rotation.modes() != m || array.len() != m {
        return Err(Error::Dimension("rotation and array must match the input modes".into()));
    }
    let n = input.particles();
    let out_basis = FockBasis::build(2 * m, n);
    let mut v = CVec::zeros(out_basis.len());
    for (k, occ) in input.basis().states().iter().enumerate() {
        let mut ext = occ.clone();
        ext.resize(2 * m, 0);
        v[out_basis.index_of(&ext).expect("extended occupation")] = input.amplitudes()[k];
    }
    let pre = pre_rotation.direct_sum(&ModeUnitary::identity(m));
    let u = beam_splitter_unitary(array).compose(&pre)?;
    let out = lift_on_basis(u.matrix(), &out_basis) * v;
    PureSectorState::normalized(out_basis, out)
}

/// Per-party occupations of the activated Fock state |n⟩ in a fixed party sector.
pub type PartyOccupations = Vec<Vec<usize>>;

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .rev()
        .flat_map(|k| {
            compositions(total - k, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, k);
                rest
            })
        })
        .collect()
}

/// Amplitudes Π_i √(n_i!/Π_K n_{K,i}!) Π_K α_{K,i}^{n_{K,i}} of |n⟩ after a_i† → Σ_K α_{K,i} a_{K,i}†,
/// restricted to the party sector `sector`. `alpha[K][i]` is the coefficient of party K on mode i.
pub fn fock_activation_amplitudes(n: &[usize], alpha: &[Vec<C64>], sector: &[usize]) -> Result<BTreeMap<PartyOccupations, C64>> {
    let parties = alpha.len();
    if parties < 2 {
        return invalid("need at least two parties");
    }
    if sector.len() != parties {
        return invalid(format!("sector has {} entries for {parties} parties", sector.len()));
    }
    let m = n.len();
    if alpha.iter().any(|row| row.len() != m) {
        return Err(Error::Dimension("every party needs one coefficient per mode".into()));
    }
    for i in 0..m {
        let norm: f64 = alpha.iter().map(|row| row[i].norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("coefficients of mode {i} have squared norm {norm}"));
        }
    }
    if sector.iter().sum::<usize>() != n.iter().sum::<usize>() {
        return invalid("sector totals do not add up to the input particle number");
    }
    // per mode, every way of splitting n_i among the parties
    let per_mode: Vec<Vec<Vec<usize>>> = n.iter().map(|&ni| compositions(ni, parties)).collect();
    let mut out = BTreeMap::new();
    let mut choice = vec![0usize; m];
    loop {
        let mut occ = vec![vec![0usize; m]; parties];
        for i in 0..m {
            for k in 0..parties {
                occ[k][i] = per_mode[i][choice[i]][k];
            }
        }
        if occ.iter().zip(sector).all(|(o, &s)| o.iter().sum::<usize>() == s) {
            let mut amp = c(1.0, 0.0);
            for i in 0..m {
                let denom: f64 = (0..parties).map(|k| factorial(occ[k][i])).product();
                amp *= (factorial(n[i]) / denom).sqrt();
                for k in 0..parties {
                    amp *= alpha[k][i].powu(occ[k][i] as u32);
                }
            }
            out.insert(occ, amp);
        }
        let mut i = 0;
        loop {
            if i == m {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < per_mode[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Party coefficients (r_i, −t_i) of a beam-splitter array.
pub fn array_coefficients(array: &BeamSplitterArray) -> Vec<Vec<C64>> {
    vec![
        array.reflectivities().iter().map(|&r| c(r, 0.0)).collect(),
        array.transmissivities().iter().map(|&t| c(-t, 0.0)).collect(),
    ]
}

/// Probability of N_A particles on side A for Fock input |n⟩ through a balanced array.
pub fn balanced_sector_probability(n: &[usize], n_a: usize) -> f64 {
    compositions(n_a, n.len())
        .iter()
        .filter(|a| a.iter().zip(n).all(|(x, y)| x <= y))
        .map(|a| a.iter().zip(n).map(|(&k, &ni)| binomial(ni, k) as f64 / 2f64.powi(ni as i32)).product::<f64>())
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

/// Compares the general-r activation of |n⟩ with diagonal local filters
/// Π(√2 r_i)^{n_{A,i}} ⊗ Π(√2 t_i)^{n_{B,i}} applied to the balanced activation.
pub fn local_filter_relation_check(n: &[usize], r: &[f64]) -> Result<FilterCheck> {
    if n.len() != r.len() {
        return Err(Error::Dimension("occupation and reflectivity vectors differ in length".into()));
    }
    let array = BeamSplitterArray::new(r.to_vec())?;
    let t = array.transmissivities();
    if r.iter().chain(&t).any(|&x| x < 1e-12) {
        return invalid("degenerate beam splitter: every r_i and t_i must be nonzero");
    }
    let m = n.len();
    let input = PureSectorState::fock(n)?;
    let id = ModeUnitary::identity(m);
    let general = activate_pure(&input, &id, &array)?;
    let balanced = activate_pure(&input, &id, &BeamSplitterArray::balanced(m))?;
    let s2 = std::f64::consts::SQRT_2;
    let basis = balanced.basis();
    let filtered = CVec::from_fn(basis.len(), |k, _| {
        let occ = basis.state(k);
        let f: f64 = (0..m).map(|i| (s2 * r[i]).powi(occ[i] as i32) * (s2 * t[i]).powi(occ[m + i] as i32)).product();
        balanced.amplitudes()[k] * f
    });
    let norm = filtered.norm();
    let filtered = filtered / C64::from(norm);
    let max_deviation = (general.amplitudes() - filtered).iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok(FilterCheck { holds: max_deviation < 1e-9, max_deviation })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractionBoundReport {
    /// Lower bound on the trace-distance SSR entanglement of the activated state.
    pub e_ssr_lower_bound: f64,
    /// Upper bound on the trace-distance particle-entanglement measure of the input.
    pub m_pe_upper_bound: f64,
    /// True when the input was decided particle-separable, making the upper bound exact.
    pub input_free: bool,
    pub consistent: bool,
}

/// Checks that the SSR entanglement extracted by activation never exceeds the input's
/// particle entanglement, both in trace distance. The SSR side is bounded from below by
/// partial-transpose witnesses per local-number sector; the particle side from above by the
/// distance to seeded particle-separable candidates.
pub fn extraction_bound_check(spec: &ActivationSpec, n_candidates: usize, seed: u64) -> Result<ExtractionBoundReport> {
    let report = activate(spec)?;
    let e_ssr_lower_bound = report
        .decomposition
        .entries
        .values()
        .map(|e| e.probability * separable_distance_lower_bound(&e.state))
        .sum();
    let state = &spec.input;
    let input_free = decide_particle_separable(state) == Some(true);
    let m_pe_upper_bound = if input_free {
        0.0
    } else {
        let m = state.modes();
        let mut candidates = Vec::new();
        for (bi, b) in state.blocks().iter().enumerate() {
            for k in 0..n_candidates.max(1) {
                let s = seed.wrapping_add((bi as u64) << 32).wrapping_add(k as u64);
                candidates.push(random_particle_separable(m, b.particles, 1 + k % 4, s)?);
            }
        }
        distance_to_candidate_set(state, &candidates)?
    };
    Ok(ExtractionBoundReport {
        e_ssr_lower_bound,
        m_pe_upper_bound,
        input_free,
        consistent: e_ssr_lower_bound <= m_pe_upper_bound + 1e-9,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ActivationBudget {
    /// Number of pre-rotations tried; the first is always the identity.
    pub rotations: usize,
    /// Coordinate-ascent sweeps over the reflectivities per rotation.
    pub sweeps: usize,
}

impl Default for ActivationBudget {
    fn default() -> Self {
        Self { rotations: 4, sweeps: 2 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ActivationSearchResult {
    /// Best SSR negativity found; a lower bound on the supremum over activations.
    pub value: f64,
    pub reflectivities: Vec<f64>,
    pub rotation_index: usize,
    pub evaluations: usize,
}

const R_GRID_STEP: f64 = 0.05;

fn ascend(input: &BlockDiagonalState, va: &ModeUnitary, sweeps: usize) -> Result<(f64, Vec<f64>, usize)> {
    let m = input.modes();
    let mut evaluations = 0;
    let mut eval = |r: &[f64]| -> Result<f64> {
        evaluations += 1;
        let spec = ActivationSpec::new(input.clone(), va.clone(), BeamSplitterArray::new(r.to_vec())?)?;
        Ok(activate(&spec)?.e_ssr_negativity)
    };
    let mut r = vec![std::f64::consts::FRAC_1_SQRT_2; m];
    let mut best = eval(&r)?;
    let steps = (1.0 / R_GRID_STEP).round() as usize;
    for _ in 0..sweeps {
        for i in 0..m {
            let mut trial = r.clone();
            for k in 0..=steps {
                trial[i] = k as f64 * R_GRID_STEP;
                let v = eval(&trial)?;
                if v > best {
                    best = v;
                    r[i] = trial[i];
                }
            }
            let mut h = R_GRID_STEP / 2.0;
            while h > 1e-4 {
                let mut moved = false;
                for x in [r[i] - h, r[i] + h] {
                    if !(0.0..=1.0).contains(&x) {
                        continue;
                    }
                    trial[i] = x;
                    let v = eval(&trial)?;
                    if v > best {
                        best = v;
                        r[i] = x;
                        moved = true;
                    }
                }
                if !moved {
                    h /= 2.0;
                }
            }
        }
    }
    Ok((best, r, evaluations))
}

/// Budgeted search for the largest SSR negativity reachable by activation of `state`.
pub fn m_pe_from_activation(state: &BlockDiagonalState, budget: ActivationBudget, seed: u64) -> Result<ActivationSearchResult> {
    let m = state.modes();
    Limits::default().check(2 * m, state.max_particles())?;
    let runs: Vec<Result<(f64, Vec<f64>, usize)>> = (0..budget.rotations.max(1))
        .into_par_iter()
        .map(|k| {
            let va = if k == 0 {
                ModeUnitary::identity(m)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                ModeUnitary::random(m, &mut rng)
            };
            ascend(state, &va, budget.sweeps)
        })
        .collect();
    let mut result = ActivationSearchResult { value: f64::NEG_INFINITY, reflectivities: vec![], rotation_index: 0, evaluations: 0 };
    for (k, run) in runs.into_iter().enumerate() {
        let (v, r, e) = run?;
        result.evaluations += e;
        if v > result.value {
            result.value = v;
            result.reflectivities = r;
            result.rotation_index = k;
        }
    }
    result.value = result.value.max(0.0);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource_states::noon_state;

    #[test]
    fn single_particle_output() {
        let spec = ActivationSpec::balanced(BlockDiagonalState::fock(&[1]).unwrap()).unwrap();
        let out = activate_pure(&PureSectorState::fock(&[1]).unwrap(), &ModeUnitary::identity(1), spec.array()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[1, 0]) - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(-h, 0.0)).norm() < 1e-15);
        assert!(activate(&spec).unwrap().e_ssr_negativity < 1e-12);
    }

    #[test]
    fn fock_pair_is_activated() {
        let r = activate(&ActivationSpec::balanced(BlockDiagonalState::fock(&[1, 1]).unwrap()).unwrap()).unwrap();
        assert!(r.e_ssr_negativity > 1e-3);
        assert!(r.verdict.ssr_entangled);
        assert_eq!(r.verdict.input_particle_separable, Some(false));
    }

    #[test]
    fn postselected_support() {
        let spec = ActivationSpec::balanced(BlockDiagonalState::fock(&[2, 2]).unwrap()).unwrap();
        let r = activate_postselect(&spec, Some((2, 2))).unwrap();
        let mut support: Vec<(Vec<usize>, Vec<usize>)> =
            r.postselected.unwrap().support.into_iter().map(|t| (t.a, t.b)).collect();
        support.sort();
        assert_eq!(support, vec![(vec![0, 2], vec![2, 0]), (vec![1, 1], vec![1, 1]), (vec![2, 0], vec![0, 2])]);
    }

    #[test]
    fn closed_form_single_mode() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let alpha = vec![vec![c(h, 0.0)], vec![c(h, 0.0)]];
        let a = fock_activation_amplitudes(&[1], &alpha, &[1, 0]).unwrap();
        assert!((a[&vec![vec![1], vec![0]]] - c(h, 0.0)).norm() < 1e-15);
        let alpha = vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
        let a = fock_activation_amplitudes(&[2, 1], &alpha, &[3, 0]).unwrap();
        assert_eq!(a.len(), 1);
        assert!(fock_activation_amplitudes(&[2, 1], &alpha, &[0, 3]).unwrap().values().all(|x| x.norm() == 0.0));
        assert!(fock_activation_amplitudes(&[2, 1], &alpha, &[1, 1]).is_err());
    }

    #[test]
    fn filter_relation() {
        assert!(local_filter_relation_check(&[1, 1], &[0.6, 0.8]).unwrap().holds);
        assert!(local_filter_relation_check(&[2, 2], &[0.6, 0.8]).unwrap().holds);
        assert!(local_filter_relation_check(&[1, 1], &[0.0, 0.8]).is_err());
        assert!(local_filter_relation_check(&[1, 1], &[1.0, 0.8]).is_err());
    }

    #[test]
    fn extraction_bound_examples() {
        let noon = noon_state(2).unwrap().to_state();
        let r = extraction_bound_check(&ActivationSpec::balanced(noon).unwrap(), 8, 1).unwrap();
        assert!(r.consistent && r.e_ssr_lower_bound > 0.0);
        let free = BlockDiagonalState::fock(&[2, 0]).unwrap();
        let r = extraction_bound_check(&ActivationSpec::balanced(free).unwrap(), 8, 1).unwrap();
        assert!(r.input_free && r.m_pe_upper_bound == 0.0 && r.e_ssr_lower_bound == 0.0);
    }

    #[test]
    fn search_is_monotone_in_budget() {
        let s = BlockDiagonalState::fock(&[1, 1]).unwrap();
        let small = m_pe_from_activation(&s, ActivationBudget { rotations: 1, sweeps: 1 }, 3).unwrap();
        let large = m_pe_from_activation(&s, ActivationBudget { rotations: 3, sweeps: 1 }, 3).unwrap();
        assert!(small.value > 0.0 && large.value >= small.value);
    }
}
