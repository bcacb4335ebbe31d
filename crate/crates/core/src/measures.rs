//! Fisher information, the metrological monotone M_PE^F, single-particle variances,
//! negativity, number-dephased entanglement and block-decomposed trace distances.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock_core::{
    one_body_operator, project_local_number, sector_rdm, split_sector, BlockDiagonalState, FockBasis, ModePartition,
    SectorState, SideBases,
};
use crate::linalg::{self, c, C64, CMat, ZERO};
use crate::linear_optics::{apply_mode_unitary, trace_out, ModeUnitary};
use crate::optim::NelderMead;

pub const QFI_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> CMat {
    match axis {
        Axis::X => CMat::from_row_slice(2, 2, &[ZERO, c(1.0, 0.0), c(1.0, 0.0), ZERO]),
        Axis::Y => CMat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
        Axis::Z => CMat::from_row_slice(2, 2, &[c(1.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)]),
    }
}

pub fn bloch_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// n·σ for a unit vector n.
pub fn bloch_operator(n: [f64; 3]) -> CMat {
    pauli(Axis::X) * c(n[0], 0.0) + pauli(Axis::Y) * c(n[1], 0.0) + pauli(Axis::Z) * c(n[2], 0.0)
}

/// Hermitian single-particle observable with operator norm at most one.
#[derive(Clone, Debug)]
pub struct SingleParticleObservable {
    h: CMat,
}

impl SingleParticleObservable {
    pub fn new(h: CMat) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::Dimension("observable must be a square matrix".into()));
        }
        if linalg::hermitian_deviation(&h) > 1e-12 {
            return invalid("observable is not Hermitian");
        }
        let norm = linalg::operator_norm_hermitian(&h);
        if norm > 1.0 + 1e-10 {
            return invalid(format!("observable has operator norm {norm} > 1"));
        }
        Ok(Self { h: linalg::hermitian_part(&h) })
    }

    pub fn pauli(axis: Axis) -> Self {
        Self { h: pauli(axis) }
    }

    pub fn bloch(theta: f64, phi: f64) -> Self {
        Self { h: bloch_operator(bloch_vector(theta, phi)) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.h
    }

    pub fn modes(&self) -> usize {
        self.h.nrows()
    }
}

/// H^(N) = (1/√N) Σ_ij h_ij a_i† a_j on each sector; H^(0) = 0.
#[derive(Clone, Debug)]
pub struct CollectiveGenerator {
    modes: usize,
    blocks: BTreeMap<usize, CMat>,
}

impl CollectiveGenerator {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn block(&self, n: usize) -> Option<&CMat> {
        self.blocks.get(&n)
    }
}

pub(crate) fn generator_block(h: &CMat, n: usize) -> CMat {
    let basis = FockBasis::build(h.nrows(), n);
    if n == 0 {
        return CMat::zeros(1, 1);
    }
    one_body_operator(h, &basis) / C64::from((n as f64).sqrt())
}

pub fn collective_generator(h: &SingleParticleObservable, n_max: usize) -> CollectiveGenerator {
    let blocks = (0..=n_max).map(|n| (n, generator_block(&h.h, n))).collect();
    CollectiveGenerator { modes: h.modes(), blocks }
}

/// Spectral-form Fisher information 2 Σ (λi−λj)²/(λi+λj) |⟨i|H|j⟩|².
pub fn qfi_dense(rho: &CMat, h: &CMat) -> f64 {
    let (vals, vecs) = linalg::eigh(rho);
    let hh = vecs.adjoint() * h * &vecs;
    spectral_qfi(&vals, &hh, &hh)
}

fn spectral_qfi(vals: &[f64], a: &CMat, b: &CMat) -> f64 {
    let d = vals.len();
    let mut f = 0.0;
    for i in 0..d {
        for j in 0..d {
            let s = vals[i] + vals[j];
            if s <= QFI_CUTOFF {
                continue;
            }
            let diff = vals[i] - vals[j];
            f += diff * diff / s * (a[(i, j)] * b[(j, i)]).re;
        }
    }
    2.0 * f
}

pub fn variance_dense(rho: &CMat, h: &CMat) -> f64 {
    let mean = linalg::trace(&(rho * h)).re;
    let sq = linalg::trace(&(rho * h * h)).re;
    sq - mean * mean
}

pub fn qfi(state: &BlockDiagonalState, g: &CollectiveGenerator) -> Result<f64> {
    if g.modes != state.modes() {
        return Err(Error::Dimension("generator and state act on different mode counts".into()));
    }
    state
        .blocks()
        .iter()
        .map(|b| {
            let h = g
                .block(b.particles)
                .ok_or_else(|| Error::Dimension(format!("generator has no block N={}", b.particles)))?;
            Ok(b.weight * qfi_dense(&b.rho, h))
        })
        .sum()
}

/// ⟨f⟩ = Σ_N p_N Tr[ρ_N Σ f_ij a_i† a_j] / N, the vacuum block contributing zero.
pub fn single_particle_expectation(state: &BlockDiagonalState, f: &CMat) -> Result<f64> {
    if f.nrows() != state.modes() {
        return Err(Error::Dimension("observable and state act on different mode counts".into()));
    }
    let mut total = 0.0;
    for b in state.blocks().iter().filter(|b| b.particles > 0) {
        let rdm = sector_rdm(&FockBasis::build(state.modes(), b.particles), &b.rho)?;
        total += b.weight * linalg::trace(&(&rdm * f)).re;
    }
    Ok(total)
}

pub fn single_particle_variance(state: &BlockDiagonalState, h: &SingleParticleObservable) -> Result<f64> {
    let mean = single_particle_expectation(state, &h.h)?;
    let sq = single_particle_expectation(state, &(&h.h * &h.h))?;
    Ok(sq - mean * mean)
}

/// F(ρ, H) − 4 V(ρ, h) without the positive part.
pub fn mpe_objective(state: &BlockDiagonalState, h: &SingleParticleObservable) -> Result<f64> {
    let g = collective_generator(h, state.max_particles());
    Ok(qfi(state, &g)? - 4.0 * single_particle_variance(state, h)?)
}

/// Objective over an ensemble {q_e, ρ_e}: Σ q_e F(ρ_e, H) − 4 V(Σ q_e ρ_e, h).
pub fn mpe_objective_ensemble(ensemble: &[(f64, BlockDiagonalState)], h: &SingleParticleObservable) -> Result<f64> {
    let mut f = 0.0;
    let mut mean = 0.0;
    let mut sq = 0.0;
    let h2 = &h.h * &h.h;
    for (q, s) in ensemble {
        let g = collective_generator(h, s.max_particles());
        f += q * qfi(s, &g)?;
        mean += q * single_particle_expectation(s, &h.h)?;
        sq += q * single_particle_expectation(s, &h2)?;
    }
    Ok(f - 4.0 * (sq - mean * mean))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpeSearch {
    /// Bloch-sphere grid plus local refinement; two-mode states only.
    TwoModeExact,
    /// Random-restart ascent over unit-norm Hermitian h, after reducing to the occupied modes.
    GeneralRestarts { seed: u64, restarts: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchMetadata {
    pub method: String,
    pub grid: Option<[usize; 2]>,
    pub evaluations: usize,
    pub restarts: usize,
    pub seed: Option<u64>,
    pub occupied_modes: usize,
    /// True when the value is only a lower bound on the maximum.
    pub lower_bound: bool,
}

#[derive(Clone, Debug)]
pub struct MpeResult {
    pub value: f64,
    /// Unclipped objective at the returned h.
    pub objective: f64,
    pub argmax_h: CMat,
    pub bloch_angles: Option<(f64, f64)>,
    pub metadata: SearchMetadata,
}

/// Hermitian basis of m×m matrices, orthonormal under the Hilbert–Schmidt product.
pub fn hermitian_basis(m: usize) -> Vec<CMat> {
    if m == 2 {
        return vec![pauli(Axis::X), pauli(Axis::Y), pauli(Axis::Z)];
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut e = CMat::zeros(m, m);
        e[(i, i)] = c(1.0, 0.0);
        out.push(e);
    }
    for i in 0..m {
        for j in i + 1..m {
            let mut e = CMat::zeros(m, m);
            e[(i, j)] = c(r, 0.0);
            e[(j, i)] = c(r, 0.0);
            out.push(e);
            let mut e = CMat::zeros(m, m);
            e[(i, j)] = c(0.0, -r);
            e[(j, i)] = c(0.0, r);
            out.push(e);
        }
    }
    out
}

/// Objective restricted to h = Σ c_k B_k is the quadratic form cᵀAc.
struct QuadraticModel {
    basis: Vec<CMat>,
    a: nalgebra::DMatrix<f64>,
}

impl QuadraticModel {
    fn build(ensemble: &[(f64, BlockDiagonalState)], basis: Vec<CMat>) -> Result<Self> {
        let k = basis.len();
        let mut q = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut mm = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut e = vec![0.0; k];
        for (weight, state) in ensemble {
            let m = state.modes();
            for b in state.blocks().iter().filter(|b| b.particles > 0) {
                let basis_n = FockBasis::build(m, b.particles);
                let (vals, vecs) = linalg::eigh(&b.rho);
                let gens: Vec<CMat> = basis
                    .iter()
                    .map(|op| vecs.adjoint() * (one_body_operator(op, &basis_n) / C64::from((b.particles as f64).sqrt())) * &vecs)
                    .collect();
                let rdm = sector_rdm(&basis_n, &b.rho)?;
                let w = weight * b.weight;
                for x in 0..k {
                    e[x] += w * linalg::trace(&(&rdm * &basis[x])).re;
                    for y in x..k {
                        let fxy = w * spectral_qfi(&vals, &gens[x], &gens[y]);
                        let anti = (&basis[x] * &basis[y] + &basis[y] * &basis[x]) * c(0.5, 0.0);
                        let mxy = w * linalg::trace(&(&rdm * anti)).re;
                        q[(x, y)] += fxy;
                        mm[(x, y)] += mxy;
                        if x != y {
                            q[(y, x)] += fxy;
                            mm[(y, x)] += mxy;
                        }
                    }
                }
            }
        }
        let ev = nalgebra::DVector::from_vec(e);
        let a = q - mm * 4.0 + (&ev * ev.transpose()) * 4.0;
        Ok(Self { basis, a })
    }

    fn value(&self, coeffs: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(coeffs);
        (v.transpose() * &self.a * &v)[(0, 0)]
    }

    fn operator(&self, coeffs: &[f64]) -> CMat {
        let m = self.basis[0].nrows();
        self.basis.iter().zip(coeffs).fold(CMat::zeros(m, m), |acc, (b, &x)| acc + b * c(x, 0.0))
    }

    /// Value with h rescaled to unit operator norm.
    fn normalized_value(&self, coeffs: &[f64]) -> f64 {
        let norm = linalg::operator_norm_hermitian(&self.operator(coeffs));
        if norm < 1e-12 {
            return f64::NEG_INFINITY;
        }
        self.value(coeffs) / (norm * norm)
    }
}

pub const BLOCH_GRID: [usize; 2] = [64, 128];

fn two_mode_search(ensemble: &[(f64, BlockDiagonalState)]) -> Result<(f64, [f64; 3], (f64, f64), usize)> {
    let model = QuadraticModel::build(ensemble, hermitian_basis(2))?;
    let f = |theta: f64, phi: f64| model.value(&bloch_vector(theta, phi));
    let [nt, np] = BLOCH_GRID;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..nt {
        let theta = (i as f64 + 0.5) * std::f64::consts::PI / nt as f64;
        for j in 0..np {
            let phi = j as f64 * 2.0 * std::f64::consts::PI / np as f64;
            let v = f(theta, phi);
            if v > best.0 {
                best = (v, theta, phi);
            }
        }
    }
    // An off-grid step keeps the first simplex from straddling a symmetric maximum.
    let nm = NelderMead { step: 0.37 * std::f64::consts::PI / nt as f64, tol: 1e-15, max_iter: 4000 };
    let min = nm.minimize(|x| -f(x[0], x[1]), &[best.1, best.2]);
    let (mut value, mut theta, mut phi) = if -min.value > best.0 { (-min.value, min.x[0], min.x[1]) } else { best };
    // The objective is a quadratic form on the unit sphere, so its top eigenvector is the exact optimum.
    let eig = model.a.clone().symmetric_eigen();
    let top = (0..3).max_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y])).unwrap();
    if eig.eigenvalues[top] > value {
        let v = eig.eigenvectors.column(top);
        value = eig.eigenvalues[top];
        theta = v[2].clamp(-1.0, 1.0).acos();
        phi = v[1].atan2(v[0]);
    }
    let theta = theta.rem_euclid(2.0 * std::f64::consts::PI);
    let (theta, phi) = if theta > std::f64::consts::PI { (2.0 * std::f64::consts::PI - theta, phi + std::f64::consts::PI) } else { (theta, phi) };
    let phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
    Ok((value, bloch_vector(theta, phi), (theta, phi), nt * np + min.evaluations))
}

fn restart_search(ensemble: &[(f64, BlockDiagonalState)], seed: u64, restarts: usize) -> Result<(f64, CMat, usize)> {
    let m = ensemble[0].1.modes();
    let model = QuadraticModel::build(ensemble, hermitian_basis(m))?;
    let k = m * m;
    let (_, top) = {
        let eig = model.a.clone().symmetric_eigen();
        let idx = (0..k).max_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y])).unwrap();
        (eig.eigenvalues[idx], eig.eigenvectors.column(idx).iter().copied().collect::<Vec<f64>>())
    };
    let runs: Vec<(f64, Vec<f64>, usize)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = if r == 0 {
                top.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (0..k).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect()
            };
            let nm = NelderMead { step: 0.2, tol: 1e-13, max_iter: 20000 };
            let min = nm.minimize(|x| -model.normalized_value(x), &start);
            (-min.value, min.x, min.evaluations)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let best = runs
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(j.cmp(i)))
        .map(|(_, r)| r)
        .unwrap();
    let h = model.operator(&best.1);
    let norm = linalg::operator_norm_hermitian(&h);
    Ok((best.0, h / c(norm, 0.0), evaluations))
}

/// Mode unitary W taking the support of the averaged single-particle state to the first modes.
fn occupied_subspace(ensemble: &[(f64, BlockDiagonalState)]) -> Result<(usize, ModeUnitary)> {
    let m = ensemble[0].1.modes();
    let mut avg = CMat::zeros(m, m);
    for (q, s) in ensemble {
        for b in s.blocks().iter().filter(|b| b.particles > 0) {
            avg += sector_rdm(&FockBasis::build(m, b.particles), &b.rho)? * c(q * b.weight, 0.0);
        }
    }
    let (vals, vecs) = linalg::eigh(&avg);
    let support = vals.iter().filter(|&&x| x > 1e-12).count();
    // columns ordered by decreasing population
    let v = CMat::from_fn(m, m, |i, j| vecs[(i, m - 1 - j)]);
    Ok((support, ModeUnitary::new(v.adjoint())?))
}

pub fn m_pe_f(state: &BlockDiagonalState, search: MpeSearch) -> Result<MpeResult> {
    m_pe_f_ensemble(&[(1.0, state.clone())], search)
}

/// M_PE^F over an ensemble produced by a measurement with a classical record.
pub fn m_pe_f_ensemble(ensemble: &[(f64, BlockDiagonalState)], search: MpeSearch) -> Result<MpeResult> {
    let m = ensemble.first().map(|e| e.1.modes()).ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
    if ensemble.iter().any(|e| e.1.modes() != m) {
        return Err(Error::Dimension("ensemble members act on different mode counts".into()));
    }
    let total: f64 = ensemble.iter().map(|e| e.0).sum();
    if (total - 1.0).abs() > 1e-10 || ensemble.iter().any(|e| e.0 < 0.0) {
        return invalid("ensemble weights must be a probability distribution");
    }
    match search {
        MpeSearch::TwoModeExact => {
            if m != 2 {
                return invalid(format!("two-mode search needs m = 2, state has {m} modes"));
            }
            let (value, n, angles, evaluations) = two_mode_search(ensemble)?;
            Ok(MpeResult {
                value: value.max(0.0),
                objective: value,
                argmax_h: bloch_operator(n),
                bloch_angles: Some(angles),
                metadata: SearchMetadata {
                    method: "bloch-grid+nelder-mead+eigen".into(),
                    grid: Some(BLOCH_GRID),
                    evaluations,
                    restarts: 0,
                    seed: None,
                    occupied_modes: 2,
                    lower_bound: false,
                },
            })
        }
        MpeSearch::GeneralRestarts { seed, restarts } => {
            let (support, w) = occupied_subspace(ensemble)?;
            if support <= 1 {
                let mut h = CMat::zeros(m, m);
                h[(0, 0)] = c(1.0, 0.0);
                return Ok(MpeResult {
                    value: 0.0,
                    objective: 0.0,
                    argmax_h: h,
                    bloch_angles: None,
                    metadata: SearchMetadata {
                        method: "single occupied mode".into(),
                        grid: None,
                        evaluations: 0,
                        restarts: 0,
                        seed: Some(seed),
                        occupied_modes: support,
                        lower_bound: false,
                    },
                });
            }
            let reduce = support < m;
            let reduced: Vec<(f64, BlockDiagonalState)> = if reduce {
                let keep: Vec<usize> = (0..support).collect();
                ensemble
                    .iter()
                    .map(|(q, s)| Ok((*q, trace_out(&apply_mode_unitary(s, &w)?, &keep)?)))
                    .collect::<Result<_>>()?
            } else {
                ensemble.to_vec()
            };
            let lift = |h_small: &CMat| -> CMat {
                if !reduce {
                    return h_small.clone();
                }
                let mut big = CMat::zeros(m, m);
                big.view_mut((0, 0), (support, support)).copy_from(h_small);
                w.matrix().adjoint() * big * w.matrix()
            };
            if support == 2 {
                let (value, n, angles, evaluations) = two_mode_search(&reduced)?;
                return Ok(MpeResult {
                    value: value.max(0.0),
                    objective: value,
                    argmax_h: lift(&bloch_operator(n)),
                    bloch_angles: if reduce { None } else { Some(angles) },
                    metadata: SearchMetadata {
                        method: "bloch-grid+nelder-mead+eigen".into(),
                        grid: Some(BLOCH_GRID),
                        evaluations,
                        restarts: 0,
                        seed: Some(seed),
                        occupied_modes: 2,
                        lower_bound: false,
                    },
                });
            }
            let (value, h, evaluations) = restart_search(&reduced, seed, restarts)?;
            Ok(MpeResult {
                value: value.max(0.0),
                objective: value,
                argmax_h: lift(&h),
                bloch_angles: None,
                metadata: SearchMetadata {
                    method: "random-restart nelder-mead".into(),
                    grid: None,
                    evaluations,
                    restarts: restarts.max(1),
                    seed: Some(seed),
                    occupied_modes: support,
                    lower_bound: true,
                },
            })
        }
    }
}

/// (‖ρ^{T_A}‖₁ − 1)/2 on the joint Fock space truncated at the state's particle number.
///
/// ρ^{T_A} conserves N_B − N_A, so the transpose is diagonalized one difference class at a time.
pub fn negativity(state: &BlockDiagonalState, partition: &ModePartition) -> Result<f64> {
    if partition.modes() != state.modes() {
        return Err(Error::Dimension("partition does not match state".into()));
    }
    if partition.a_modes().is_empty() || partition.b_modes().is_empty() {
        return Ok(0.0);
    }
    let n_max = state.max_particles();
    let sides = SideBases::new(partition, n_max);
    // global index of local states: offset by local particle number
    let off_a: Vec<usize> = (0..=n_max).scan(0, |acc, n| { let o = *acc; *acc += sides.a(n).len(); Some(o) }).collect();
    let off_b: Vec<usize> = (0..=n_max).scan(0, |acc, n| { let o = *acc; *acc += sides.b(n).len(); Some(o) }).collect();
    let mut groups: BTreeMap<i64, (HashMap<(usize, usize), usize>, Vec<(usize, usize, C64)>)> = BTreeMap::new();
    for b in state.blocks() {
        let n = b.particles;
        let split = split_sector(&FockBasis::build(state.modes(), n), partition, &sides);
        for (k, sk) in split.iter().enumerate() {
            for (l, sl) in split.iter().enumerate() {
                let x = b.rho[(k, l)] * b.weight;
                if x == ZERO {
                    continue;
                }
                // ⟨ja ib|ρ^{T_A}|ia jb⟩ = ⟨ia ib|ρ|ja jb⟩
                let row = (off_a[sl.n_a] + sl.ia, off_b[n - sk.n_a] + sk.ib);
                let col = (off_a[sk.n_a] + sk.ia, off_b[n - sl.n_a] + sl.ib);
                let d = (n - sk.n_a) as i64 - sl.n_a as i64;
                let (index, entries) = groups.entry(d).or_default();
                let next = index.len();
                let r = *index.entry(row).or_insert(next);
                let next = index.len();
                let cc = *index.entry(col).or_insert(next);
                entries.push((r, cc, x));
            }
        }
    }
    let total: f64 = groups
        .into_values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(index, entries)| {
            let dim = index.len();
            let mut m = CMat::zeros(dim, dim);
            for (r, cc, x) in entries {
                m[(r, cc)] += x;
            }
            linalg::eigvalsh(&m).iter().filter(|&&v| v < 0.0).map(|v| -v).sum::<f64>()
        })
        .sum();
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SsrMeasure {
    Negativity,
    EntanglementEntropySectorwise,
}

pub const PURE_SECTOR_TOL: f64 = 1e-8;

/// Entanglement left after local-number dephasing.
pub fn e_ssr(state: &BlockDiagonalState, partition: &ModePartition, measure: SsrMeasure) -> Result<f64> {
    let dec = project_local_number(state, partition)?;
    match measure {
        SsrMeasure::Negativity => Ok(dec.entries.values().map(|e| e.probability * e.state.negativity()).sum()),
        SsrMeasure::EntanglementEntropySectorwise => {
            let mut total = 0.0;
            for ((na, nb), e) in &dec.entries {
                if !e.state.is_pure(PURE_SECTOR_TOL) {
                    return invalid(format!("sector ({na},{nb}) is mixed; sectorwise entropy needs pure sectors"));
                }
                total += e.probability * e.state.entanglement_entropy();
            }
            Ok(total)
        }
    }
}

/// Lower bound on the trace distance from a sector state to the separable states of its
/// sector, from the partial-transpose witness of the most negative eigenvector.
pub fn separable_distance_lower_bound(sector: &SectorState) -> f64 {
    if sector.dim_a() == 1 || sector.dim_b() == 1 {
        return 0.0;
    }
    let pt = sector.partial_transpose();
    let (vals, vecs) = linalg::eigh(&pt);
    if vals[0] >= -1e-12 {
        return 0.0;
    }
    let v = vecs.column(0).into_owned();
    let witness = SectorState { rho: linalg::projector(&v), ..sector.clone() }.partial_transpose();
    let w = linalg::eigvalsh(&witness);
    let spread = w[w.len() - 1] - w[0];
    -vals[0] / spread
}

/// ½ ‖ρ − σ‖₁ for number-diagonal states, summed block by block.
pub fn block_trace_distance(s1: &BlockDiagonalState, s2: &BlockDiagonalState) -> Result<f64> {
    if s1.modes() != s2.modes() {
        return Err(Error::Dimension("states act on different mode counts".into()));
    }
    let mut ns: Vec<usize> = s1.blocks().iter().chain(s2.blocks()).map(|b| b.particles).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut total = 0.0;
    for n in ns {
        let diff = match (s1.block(n), s2.block(n)) {
            (Some(a), Some(b)) => &a.rho * c(a.weight, 0.0) - &b.rho * c(b.weight, 0.0),
            (Some(a), None) => &a.rho * c(a.weight, 0.0),
            (None, Some(b)) => -(&b.rho * c(b.weight, 0.0)),
            (None, None) => unreachable!(),
        };
        total += linalg::trace_norm_hermitian(&diff);
    }
    Ok(0.5 * total)
}

/// Upper bound on the trace-distance resource measure from a set of free candidates.
///
/// Free sets are direct sums over particle number, so each block of `state` is matched
/// with the closest candidate block of the same N; the result is also compared against
/// each candidate as a whole and the smaller value returned.
pub fn distance_to_candidate_set(state: &BlockDiagonalState, candidates: &[BlockDiagonalState]) -> Result<f64> {
    if candidates.is_empty() {
        return invalid("empty candidate set");
    }
    if candidates.iter().any(|s| s.modes() != state.modes()) {
        return Err(Error::Dimension("candidates act on a different mode count".into()));
    }
    let mut blockwise = 0.0;
    for b in state.blocks() {
        let best = candidates
            .iter()
            .filter_map(|cand| cand.block(b.particles))
            .map(|cb| 0.5 * linalg::trace_norm_hermitian(&(&b.rho - &cb.rho)))
            .fold(1.0f64, f64::min);
        blockwise += b.weight * best;
    }
    let mut best = blockwise;
    for cand in candidates {
        best = best.min(block_trace_distance(state, cand)?);
    }
    Ok(best)
}
