//! Occupation-number bases, number-diagonal states and local-number bookkeeping.
//!
//! Sector bases list occupation vectors in lexicographically descending order,
//! so `(2,0) < (1,1) < (0,2)` by position. Density matrices are stored dense per
//! total-number block.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, hermitian_deviation, hermitian_part, C64, CMat, CVec, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const WEIGHT_TOL: f64 = 1e-12;
pub const DROP_WEIGHT: f64 = 1e-14;

/// Caps on the combined mode count and the particle number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_particles: usize,
    pub max_modes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_particles: 6, max_modes: 8 }
    }
}

impl Limits {
    pub fn check(&self, modes: usize, particles: usize) -> Result<()> {
        if modes > self.max_modes {
            return Err(Error::CapExceeded(format!("{modes} modes > max_modes {}", self.max_modes)));
        }
        if particles > self.max_particles {
            return Err(Error::CapExceeded(format!(
                "{particles} particles > max_particles {}",
                self.max_particles
            )));
        }
        Ok(())
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of the N-particle sector on m modes.
pub fn sector_dim(m: usize, n: usize) -> usize {
    if m == 0 {
        return usize::from(n == 0);
    }
    binomial(n + m - 1, m - 1)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    modes: usize,
    particles: usize,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, particles: usize) -> Result<Self> {
        if modes == 0 {
            return invalid("a Fock basis needs at least one mode");
        }
        Ok(Self::build(modes, particles))
    }

    // Zero modes are allowed internally: an empty side of a partition holds only the vacuum.
    pub(crate) fn build(modes: usize, particles: usize) -> Self {
        let mut states = Vec::with_capacity(sector_dim(modes, particles));
        let mut current = vec![0; modes];
        fill(&mut current, 0, particles, &mut states);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self { modes, particles, states, index }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill(current: &mut Vec<usize>, pos: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
    let m = current.len();
    if m == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == m - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(current, pos + 1, remaining - k, out);
    }
    current[pos] = 0;
}

pub fn enumerate_basis(m: usize, n: usize) -> Result<FockBasis> {
    FockBasis::new(m, n)
}

/// Normalized amplitude vector on one sector.
#[derive(Clone, Debug)]
pub struct PureSectorState {
    basis: FockBasis,
    amplitudes: CVec,
}

impl PureSectorState {
    pub fn new(basis: FockBasis, amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a sector of dimension {}",
                amplitudes.len(),
                basis.len()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("squared norm {norm} differs from 1"));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn normalized(basis: FockBasis, amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return invalid("zero amplitude vector");
        }
        let amplitudes = amplitudes / C64::from(norm);
        Self::new(basis, amplitudes)
    }

    /// The number state |n_0, …, n_{m−1}⟩.
    pub fn fock(occupation: &[usize]) -> Result<Self> {
        let basis = FockBasis::new(occupation.len(), occupation.iter().sum())?;
        let mut amps = CVec::zeros(basis.len());
        amps[basis.index_of(occupation).expect("occupation is in its own sector")] = linalg::ONE;
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn modes(&self) -> usize {
        self.basis.modes
    }

    pub fn particles(&self) -> usize {
        self.basis.particles
    }

    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        self.basis.index_of(occupation).map_or(ZERO, |i| self.amplitudes[i])
    }

    pub fn with_canonical_phase(mut self) -> Self {
        linalg::fix_global_phase(&mut self.amplitudes, 1e-14);
        self
    }

    pub fn density_matrix(&self) -> CMat {
        linalg::projector(&self.amplitudes)
    }

    pub fn to_state(&self) -> BlockDiagonalState {
        BlockDiagonalState::from_parts(
            self.modes(),
            vec![Block { particles: self.particles(), weight: 1.0, rho: self.density_matrix() }],
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub particles: usize,
    pub weight: f64,
    pub rho: CMat,
}

/// Mixed bosonic state, block diagonal in the total particle number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct BlockDiagonalState {
    modes: usize,
    blocks: Vec<Block>,
}

impl BlockDiagonalState {
    /// Validating constructor. Matrices are re-symmetrized; weights must sum to one.
    pub fn new(modes: usize, blocks: Vec<(usize, f64, CMat)>) -> Result<Self> {
        if modes == 0 {
            return invalid("a state needs at least one mode");
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0.0;
        let mut out = Vec::with_capacity(blocks.len());
        for (n, p, rho) in blocks {
            if !seen.insert(n) {
                return invalid(format!("duplicate block N={n}"));
            }
            let dim = sector_dim(modes, n);
            if rho.shape() != (dim, dim) {
                return Err(Error::Dimension(format!(
                    "block N={n} has shape {:?}, sector dimension is {dim}",
                    rho.shape()
                )));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return invalid(format!("block N={n} has weight {p}"));
            }
            if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid(format!("block N={n} has non-finite entries"));
            }
            let dev = hermitian_deviation(&rho);
            if dev > HERMITIAN_TOL {
                return invalid(format!("block N={n} is not Hermitian (deviation {dev:.3e})"));
            }
            let rho = hermitian_part(&rho);
            let tr = linalg::trace(&rho).re;
            if (tr - 1.0).abs() > 1e-10 {
                return invalid(format!("block N={n} has trace {tr}"));
            }
            let min_eig = linalg::eigvalsh(&rho).first().copied().unwrap_or(0.0);
            if min_eig < -PSD_TOL {
                return invalid(format!("block N={n} has eigenvalue {min_eig:.3e}"));
            }
            total += p;
            out.push(Block { particles: n, weight: p, rho });
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return invalid(format!("block weights sum to {total}"));
        }
        Ok(Self::from_parts(modes, out))
    }

    /// Assembles blocks produced by PSD-preserving operations. Tiny weights are dropped,
    /// and weights are renormalized only when something was dropped or the sum is off.
    pub(crate) fn from_parts(modes: usize, mut blocks: Vec<Block>) -> Self {
        blocks.sort_by_key(|b| b.particles);
        let before = blocks.len();
        let total: f64 = blocks.iter().map(|b| b.weight).sum();
        blocks.retain(|b| b.weight / total >= DROP_WEIGHT);
        let kept: f64 = blocks.iter().map(|b| b.weight).sum();
        let renormalize = blocks.len() != before || (kept - 1.0).abs() > 64.0 * f64::EPSILON;
        for b in &mut blocks {
            if renormalize {
                b.weight /= kept;
            }
            b.rho = hermitian_part(&b.rho);
        }
        Self { modes, blocks }
    }

    /// Builds a state from unnormalized positive blocks: weights are the block traces.
    pub(crate) fn from_unnormalized(modes: usize, blocks: Vec<(usize, CMat)>) -> Result<Self> {
        let mut parts = Vec::with_capacity(blocks.len());
        for (n, m) in blocks {
            let w = linalg::trace(&m).re;
            if w > 0.0 {
                parts.push(Block { particles: n, weight: w, rho: m / C64::from(w) });
            }
        }
        let total: f64 = parts.iter().map(|b| b.weight).sum();
        if !(total > 0.0) {
            return invalid("state has zero trace");
        }
        Ok(Self::from_parts(modes, parts))
    }

    pub fn vacuum(modes: usize) -> Self {
        Self::from_parts(modes, vec![Block { particles: 0, weight: 1.0, rho: CMat::identity(1, 1) }])
    }

    pub fn fock(occupation: &[usize]) -> Result<Self> {
        Ok(PureSectorState::fock(occupation)?.to_state())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, n: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.particles == n)
    }

    pub fn max_particles(&self) -> usize {
        self.blocks.iter().map(|b| b.particles).max().unwrap_or(0)
    }

    pub fn mean_particles(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight * b.particles as f64).sum()
    }

    pub fn vacuum_weight(&self) -> f64 {
        self.block(0).map_or(0.0, |b| b.weight)
    }

    /// The state as a pure sector vector, if it has one block of purity 1 − tol.
    pub fn as_pure(&self, tol: f64) -> Option<PureSectorState> {
        if self.blocks.len() != 1 {
            return None;
        }
        let b = &self.blocks[0];
        if linalg::purity(&b.rho) < 1.0 - tol {
            return None;
        }
        let (_, v) = linalg::top_eigenvector(&b.rho);
        let basis = FockBasis::build(self.modes, b.particles);
        PureSectorState::normalized(basis, v).ok().map(PureSectorState::with_canonical_phase)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    #[serde(rename = "N")]
    n: usize,
    p: f64,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    modes: usize,
    blocks: Vec<BlockRepr>,
}

pub(crate) fn matrix_to_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = rows.len();
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(n, cols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl From<BlockDiagonalState> for StateRepr {
    fn from(s: BlockDiagonalState) -> Self {
        StateRepr {
            modes: s.modes,
            blocks: s
                .blocks
                .iter()
                .map(|b| BlockRepr { n: b.particles, p: b.weight, matrix: matrix_to_pairs(&b.rho) })
                .collect(),
        }
    }
}

impl TryFrom<StateRepr> for BlockDiagonalState {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        let blocks = r
            .blocks
            .into_iter()
            .map(|b| Ok((b.n, b.p, pairs_to_matrix(&b.matrix)?)))
            .collect::<Result<Vec<_>>>()?;
        BlockDiagonalState::new(r.modes, blocks)
    }
}

/// Disjoint ordered mode sets (A, B) covering all modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePartition {
    a_modes: Vec<usize>,
    b_modes: Vec<usize>,
}

impl ModePartition {
    pub fn new(a_modes: Vec<usize>, b_modes: Vec<usize>) -> Result<Self> {
        let m = a_modes.len() + b_modes.len();
        let mut seen = vec![false; m];
        for &k in a_modes.iter().chain(&b_modes) {
            if k >= m {
                return invalid(format!("mode {k} outside 0..{m}: partition must cover all modes"));
            }
            if seen[k] {
                return invalid(format!("mode {k} appears twice"));
            }
            seen[k] = true;
        }
        if m == 0 {
            return invalid("empty partition");
        }
        Ok(Self { a_modes, b_modes })
    }

    /// A = first `m` modes, B = the next `m`.
    pub fn halves(m: usize) -> Self {
        Self { a_modes: (0..m).collect(), b_modes: (m..2 * m).collect() }
    }

    pub fn a_modes(&self) -> &[usize] {
        &self.a_modes
    }

    pub fn b_modes(&self) -> &[usize] {
        &self.b_modes
    }

    pub fn modes(&self) -> usize {
        self.a_modes.len() + self.b_modes.len()
    }

    pub fn swapped(&self) -> Self {
        Self { a_modes: self.b_modes.clone(), b_modes: self.a_modes.clone() }
    }

    fn check(&self, modes: usize) -> Result<()> {
        if self.modes() != modes {
            return Err(Error::Dimension(format!(
                "partition covers {} modes, state has {modes}",
                self.modes()
            )));
        }
        Ok(())
    }
}

/// Caches the bases of each side of a partition, indexed by local particle number.
pub(crate) struct SideBases {
    a: Vec<FockBasis>,
    b: Vec<FockBasis>,
}

impl SideBases {
    pub fn new(partition: &ModePartition, max_n: usize) -> Self {
        let ma = partition.a_modes.len();
        let mb = partition.b_modes.len();
        Self {
            a: (0..=max_n).map(|n| FockBasis::build(ma, n)).collect(),
            b: (0..=max_n).map(|n| FockBasis::build(mb, n)).collect(),
        }
    }

    pub fn a(&self, n: usize) -> &FockBasis {
        &self.a[n]
    }

    pub fn b(&self, n: usize) -> &FockBasis {
        &self.b[n]
    }
}

/// Location of a global basis vector in the local product basis.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Split {
    pub n_a: usize,
    pub ia: usize,
    pub ib: usize,
}

pub(crate) fn split_sector(basis: &FockBasis, partition: &ModePartition, sides: &SideBases) -> Vec<Split> {
    let n = basis.particles();
    basis
        .states()
        .iter()
        .map(|occ| {
            let oa: Vec<usize> = partition.a_modes.iter().map(|&k| occ[k]).collect();
            let ob: Vec<usize> = partition.b_modes.iter().map(|&k| occ[k]).collect();
            let n_a: usize = oa.iter().sum();
            Split {
                n_a,
                ia: sides.a(n_a).index_of(&oa).expect("local occupation in local basis"),
                ib: sides.b(n - n_a).index_of(&ob).expect("local occupation in local basis"),
            }
        })
        .collect()
}

/// Normalized state in a fixed (N_A, N_B) sector, indexed as `ia * dim_b + ib`.
#[derive(Clone, Debug)]
pub struct SectorState {
    pub n_a: usize,
    pub n_b: usize,
    pub basis_a: FockBasis,
    pub basis_b: FockBasis,
    pub rho: CMat,
}

impl SectorState {
    pub fn dim_a(&self) -> usize {
        self.basis_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.basis_b.len()
    }

    pub fn purity(&self) -> f64 {
        linalg::purity(&self.rho)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.purity() >= 1.0 - tol
    }

    /// Amplitude of the product basis vector |occ_a⟩|occ_b⟩ for a pure sector.
    pub fn pure_vector(&self) -> CVec {
        let (_, mut v) = linalg::top_eigenvector(&self.rho);
        linalg::fix_global_phase(&mut v, 1e-14);
        v
    }

    /// Squared Schmidt coefficients of the principal eigenvector, descending.
    pub fn schmidt_spectrum(&self) -> Vec<f64> {
        let v = self.pure_vector();
        let (da, db) = (self.dim_a(), self.dim_b());
        let m = CMat::from_fn(da, db, |i, j| v[i * db + j]);
        let mut s: Vec<f64> = m.singular_values().iter().map(|x| x * x).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Partial transpose on A.
    pub fn partial_transpose(&self) -> CMat {
        let (da, db) = (self.dim_a(), self.dim_b());
        CMat::from_fn(da * db, da * db, |r, c| {
            let (ia, ib) = (r / db, r % db);
            let (ja, jb) = (c / db, c % db);
            self.rho[(ja * db + ib, ia * db + jb)]
        })
    }

    pub fn negativity(&self) -> f64 {
        if self.dim_a() == 1 || self.dim_b() == 1 {
            return 0.0;
        }
        linalg::eigvalsh(&self.partial_transpose()).iter().filter(|&&x| x < 0.0).map(|x| -x).sum()
    }

    /// Reduced state on A.
    pub fn reduced_a(&self) -> CMat {
        let (da, db) = (self.dim_a(), self.dim_b());
        CMat::from_fn(da, da, |i, j| (0..db).map(|k| self.rho[(i * db + k, j * db + k)]).sum())
    }

    pub fn entanglement_entropy(&self) -> f64 {
        linalg::entropy_bits(&self.schmidt_spectrum())
    }
}

#[derive(Clone, Debug)]
pub struct SectorEntry {
    pub probability: f64,
    pub state: SectorState,
}

/// (N_A, N_B) → (probability, normalized sector state).
#[derive(Clone, Debug)]
pub struct SectorDecomposition {
    pub partition: ModePartition,
    pub entries: BTreeMap<(usize, usize), SectorEntry>,
}

impl SectorDecomposition {
    pub fn total_probability(&self) -> f64 {
        self.entries.values().map(|e| e.probability).sum()
    }

    pub fn get(&self, n_a: usize, n_b: usize) -> Option<&SectorEntry> {
        self.entries.get(&(n_a, n_b))
    }
}

pub fn project_local_number(state: &BlockDiagonalState, partition: &ModePartition) -> Result<SectorDecomposition> {
    partition.check(state.modes())?;
    let sides = SideBases::new(partition, state.max_particles());
    let mut entries = BTreeMap::new();
    for block in state.blocks() {
        let n = block.particles;
        let basis = FockBasis::build(state.modes(), n);
        let split = split_sector(&basis, partition, &sides);
        for n_a in 0..=n {
            let members: Vec<usize> = (0..split.len()).filter(|&k| split[k].n_a == n_a).collect();
            let inner: f64 = members.iter().map(|&k| block.rho[(k, k)].re).sum();
            let probability = block.weight * inner;
            if members.is_empty() || probability < DROP_WEIGHT {
                continue;
            }
            let (ba, bb) = (sides.a(n_a).clone(), sides.b(n - n_a).clone());
            let db = bb.len();
            let mut rho = CMat::zeros(ba.len() * db, ba.len() * db);
            for &k in &members {
                for &l in &members {
                    let (sk, sl) = (split[k], split[l]);
                    rho[(sk.ia * db + sk.ib, sl.ia * db + sl.ib)] = block.rho[(k, l)] / C64::from(inner);
                }
            }
            let state = SectorState { n_a, n_b: n - n_a, basis_a: ba, basis_b: bb, rho: hermitian_part(&rho) };
            entries.insert((n_a, n - n_a), SectorEntry { probability, state });
        }
    }
    Ok(SectorDecomposition { partition: partition.clone(), entries })
}

/// Φ_A ⊗ Φ_B: removes coherences between different local numbers.
pub fn dephase_local(state: &BlockDiagonalState, partition: &ModePartition) -> Result<BlockDiagonalState> {
    partition.check(state.modes())?;
    let sides = SideBases::new(partition, state.max_particles());
    let blocks = state
        .blocks()
        .iter()
        .map(|b| {
            let basis = FockBasis::build(state.modes(), b.particles);
            let split = split_sector(&basis, partition, &sides);
            let rho = CMat::from_fn(b.rho.nrows(), b.rho.ncols(), |i, j| {
                if split[i].n_a == split[j].n_a { b.rho[(i, j)] } else { ZERO }
            });
            Block { particles: b.particles, weight: b.weight, rho }
        })
        .collect();
    Ok(BlockDiagonalState::from_parts(state.modes(), blocks))
}

pub fn tensor_compose(s1: &BlockDiagonalState, s2: &BlockDiagonalState) -> Result<BlockDiagonalState> {
    tensor_compose_with(s1, s2, &Limits::default())
}

/// Joint state on m1 + m2 modes, s1's modes first.
pub fn tensor_compose_with(s1: &BlockDiagonalState, s2: &BlockDiagonalState, limits: &Limits) -> Result<BlockDiagonalState> {
    let (m1, m2) = (s1.modes(), s2.modes());
    let m = m1 + m2;
    limits.check(m, s1.max_particles() + s2.max_particles())?;
    let mut acc: BTreeMap<usize, CMat> = BTreeMap::new();
    for b1 in s1.blocks() {
        let basis1 = FockBasis::build(m1, b1.particles);
        for b2 in s2.blocks() {
            let basis2 = FockBasis::build(m2, b2.particles);
            let n = b1.particles + b2.particles;
            let joint = FockBasis::build(m, n);
            let target = acc.entry(n).or_insert_with(|| CMat::zeros(joint.len(), joint.len()));
            let w = C64::from(b1.weight * b2.weight);
            let map: Vec<Vec<usize>> = basis1
                .states()
                .iter()
                .map(|o1| {
                    basis2
                        .states()
                        .iter()
                        .map(|o2| {
                            let occ: Vec<usize> = o1.iter().chain(o2).copied().collect();
                            joint.index_of(&occ).expect("concatenated occupation")
                        })
                        .collect()
                })
                .collect();
            for i1 in 0..basis1.len() {
                for j1 in 0..basis1.len() {
                    let x = b1.rho[(i1, j1)];
                    if x == ZERO {
                        continue;
                    }
                    for i2 in 0..basis2.len() {
                        for j2 in 0..basis2.len() {
                            target[(map[i1][i2], map[j1][j2])] += w * x * b2.rho[(i2, j2)];
                        }
                    }
                }
            }
        }
    }
    BlockDiagonalState::from_unnormalized(m, acc.into_iter().collect())
}

/// Sparse matrix elements of a_c† a_d on a sector: (column, row, value).
pub(crate) fn hopping(basis: &FockBasis, create: usize, annihilate: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (col, occ) in basis.states().iter().enumerate() {
        if occ[annihilate] == 0 {
            continue;
        }
        let mut next = occ.clone();
        let amp_down = (next[annihilate] as f64).sqrt();
        next[annihilate] -= 1;
        next[create] += 1;
        let amp_up = (next[create] as f64).sqrt();
        let row = basis.index_of(&next).expect("hopping stays in sector");
        out.push((col, row, amp_down * amp_up));
    }
    out
}

/// Σ_ij h_ij a_i† a_j on a sector.
pub fn one_body_operator(h: &CMat, basis: &FockBasis) -> CMat {
    let m = basis.modes();
    let mut out = CMat::zeros(basis.len(), basis.len());
    for i in 0..m {
        for j in 0..m {
            let hij = h[(i, j)];
            if hij == ZERO {
                continue;
            }
            for (col, row, v) in hopping(basis, i, j) {
                out[(row, col)] += hij * v;
            }
        }
    }
    out
}

/// Single-particle reduced matrix of a sector density matrix: entry (i, j) = Tr[ρ a_j† a_i] / N.
pub fn sector_rdm(basis: &FockBasis, rho: &CMat) -> Result<CMat> {
    let n = basis.particles();
    if n == 0 {
        return invalid("single-particle reduced state undefined for N = 0");
    }
    let m = basis.modes();
    let mut out = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // ⟨l|a_j† a_i|k⟩ = v  ⇒  Tr[ρ a_j† a_i] = Σ ρ_kl v
            out[(i, j)] = hopping(basis, j, i).iter().map(|&(k, l, v)| rho[(k, l)] * v).sum::<C64>() / n as f64;
        }
    }
    Ok(out)
}

pub fn single_particle_rdm(s: &PureSectorState) -> Result<CMat> {
    sector_rdm(s.basis(), &s.density_matrix())
}

/// Isometry from a sector into the symmetric subspace of (C^m)^{⊗N}.
pub fn first_quantized_isometry(basis: &FockBasis) -> CMat {
    let (m, n) = (basis.modes(), basis.particles());
    let total = m.pow(n as u32);
    let mut v = CMat::zeros(total, basis.len());
    let norm: Vec<f64> = basis
        .states()
        .iter()
        .map(|occ| (occ.iter().map(|&k| factorial(k)).product::<f64>() / factorial(n)).sqrt())
        .collect();
    for t in 0..total {
        let mut occ = vec![0; m];
        let mut x = t;
        for _ in 0..n {
            occ[x % m] += 1;
            x /= m;
        }
        let col = basis.index_of(&occ).expect("tuple occupation");
        v[(t, col)] = C64::from(norm[col]);
    }
    v
}
