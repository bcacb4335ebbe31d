//! Passive linear optics on Fock sectors and number-respecting measurements.
//!
//! A [`ModeUnitary`] `u` maps a single-particle amplitude vector ψ to uψ; column j is
//! the image of mode j, so a_j† ↦ Σ_i u_ij a_i†. With this reading the 50:50 matrix
//! [[1,1],[−1,1]]/√2 sends |1,0⟩ to (|1,0⟩ − |0,1⟩)/√2.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock_core::{
    factorial, matrix_to_pairs, pairs_to_matrix, split_sector, Block, BlockDiagonalState, FockBasis, Limits,
    ModePartition, SideBases,
};
use crate::linalg::{self, C64, CMat, ZERO};

pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UnitaryRepr", into = "UnitaryRepr")]
pub struct ModeUnitary {
    matrix: CMat,
}

#[derive(Serialize, Deserialize)]
struct UnitaryRepr {
    matrix: Vec<Vec<[f64; 2]>>,
}

impl From<ModeUnitary> for UnitaryRepr {
    fn from(u: ModeUnitary) -> Self {
        UnitaryRepr { matrix: matrix_to_pairs(&u.matrix) }
    }
}

impl TryFrom<UnitaryRepr> for ModeUnitary {
    type Error = Error;

    fn try_from(r: UnitaryRepr) -> Result<Self> {
        ModeUnitary::new(pairs_to_matrix(&r.matrix)?)
    }
}

impl ModeUnitary {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!("mode unitary must be square, got {:?}", matrix.shape())));
        }
        if !linalg::is_unitary(&matrix, UNITARY_TOL) {
            return invalid("matrix is not unitary within 1e-10");
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self { matrix: CMat::identity(m, m) }
    }

    pub fn random<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        Self { matrix: linalg::random_unitary(m, rng) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &ModeUnitary) -> Result<Self> {
        if self.modes() != other.modes() {
            return Err(Error::Dimension("composing unitaries on different mode counts".into()));
        }
        Ok(Self { matrix: &self.matrix * &other.matrix })
    }

    /// Block-diagonal u ⊕ v, u on the first modes.
    pub fn direct_sum(&self, other: &ModeUnitary) -> Self {
        let (a, b) = (self.modes(), other.modes());
        let mut m = CMat::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        Self { matrix: m }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Unitary on the (m, N) sector induced by `u`.
pub fn lift_unitary(u: &ModeUnitary, n: usize) -> CMat {
    let m = u.modes();
    let basis = FockBasis::build(m, n);
    lift_on_basis(u.matrix(), &basis)
}

pub(crate) fn lift_on_basis(u: &CMat, basis: &FockBasis) -> CMat {
    let m = basis.modes();
    let dim = basis.len();
    let mut out = CMat::zeros(dim, dim);
    for (col, occ) in basis.states().iter().enumerate() {
        let norm = occ.iter().map(|&k| factorial(k)).product::<f64>().sqrt();
        // polynomial in commuting creation operators, keyed by exponent vector
        let mut poly: HashMap<Vec<usize>, C64> = HashMap::new();
        poly.insert(vec![0; m], C64::from(1.0 / norm));
        for (i, &count) in occ.iter().enumerate() {
            for _ in 0..count {
                let mut next: HashMap<Vec<usize>, C64> = HashMap::with_capacity(poly.len() * m);
                for (mono, coef) in &poly {
                    for j in 0..m {
                        let uji = u[(j, i)];
                        if uji == ZERO {
                            continue;
                        }
                        let mut k = mono.clone();
                        k[j] += 1;
                        *next.entry(k).or_insert(ZERO) += coef * uji;
                    }
                }
                poly = next;
            }
        }
        for (mono, coef) in poly {
            let row = basis.index_of(&mono).expect("monomial stays in sector");
            let fact = mono.iter().map(|&k| factorial(k)).product::<f64>().sqrt();
            out[(row, col)] = coef * fact;
        }
    }
    out
}

pub fn apply_mode_unitary(state: &BlockDiagonalState, u: &ModeUnitary) -> Result<BlockDiagonalState> {
    if u.modes() != state.modes() {
        return Err(Error::Dimension(format!(
            "unitary on {} modes applied to a state on {}",
            u.modes(),
            state.modes()
        )));
    }
    let blocks = state
        .blocks()
        .iter()
        .map(|b| {
            let lifted = lift_unitary(u, b.particles);
            Block { particles: b.particles, weight: b.weight, rho: &lifted * &b.rho * lifted.adjoint() }
        })
        .collect();
    Ok(BlockDiagonalState::from_parts(state.modes(), blocks))
}

pub fn append_vacuum(state: &BlockDiagonalState, k: usize) -> Result<BlockDiagonalState> {
    append_vacuum_with(state, k, &Limits::default())
}

/// Adds `k` empty modes after the existing ones.
pub fn append_vacuum_with(state: &BlockDiagonalState, k: usize, limits: &Limits) -> Result<BlockDiagonalState> {
    if k == 0 {
        return invalid("append at least one vacuum mode");
    }
    let m = state.modes();
    limits.check(m + k, state.max_particles())?;
    let blocks = state
        .blocks()
        .iter()
        .map(|b| {
            let small = FockBasis::build(m, b.particles);
            let big = FockBasis::build(m + k, b.particles);
            let map: Vec<usize> = small
                .states()
                .iter()
                .map(|o| {
                    let mut occ = o.clone();
                    occ.resize(m + k, 0);
                    big.index_of(&occ).expect("padded occupation")
                })
                .collect();
            let mut rho = CMat::zeros(big.len(), big.len());
            for i in 0..small.len() {
                for j in 0..small.len() {
                    rho[(map[i], map[j])] = b.rho[(i, j)];
                }
            }
            Block { particles: b.particles, weight: b.weight, rho }
        })
        .collect();
    Ok(BlockDiagonalState::from_parts(m + k, blocks))
}

/// Partial trace keeping the listed modes (in the listed order).
pub fn trace_out(state: &BlockDiagonalState, keep: &[usize]) -> Result<BlockDiagonalState> {
    let rest: Vec<usize> = (0..state.modes()).filter(|k| !keep.contains(k)).collect();
    let partition = ModePartition::new(keep.to_vec(), rest)?;
    if keep.is_empty() {
        return invalid("keep at least one mode");
    }
    let sides = SideBases::new(&partition, state.max_particles());
    let mut acc: BTreeMap<usize, CMat> = BTreeMap::new();
    for b in state.blocks() {
        let basis = FockBasis::build(state.modes(), b.particles);
        let split = split_sector(&basis, &partition, &sides);
        for (k, sk) in split.iter().enumerate() {
            for (l, sl) in split.iter().enumerate() {
                if sk.n_a != sl.n_a || sk.ib != sl.ib {
                    continue;
                }
                let dim = sides.a(sk.n_a).len();
                let target = acc.entry(sk.n_a).or_insert_with(|| CMat::zeros(dim, dim));
                target[(sk.ia, sl.ia)] += b.rho[(k, l)] * b.weight;
            }
        }
    }
    BlockDiagonalState::from_unnormalized(keep.len(), acc.into_iter().collect())
}

/// Reflectivities of a beam-splitter array coupling mode i of A with mode i of B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterArray {
    reflectivities: Vec<f64>,
}

impl BeamSplitterArray {
    pub fn new(reflectivities: Vec<f64>) -> Result<Self> {
        if reflectivities.is_empty() {
            return invalid("beam-splitter array needs at least one element");
        }
        if let Some(r) = reflectivities.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return invalid(format!("reflectivity {r} outside [0, 1]"));
        }
        Ok(Self { reflectivities })
    }

    pub fn balanced(m: usize) -> Self {
        Self { reflectivities: vec![std::f64::consts::FRAC_1_SQRT_2; m] }
    }

    pub fn identity(m: usize) -> Self {
        Self { reflectivities: vec![1.0; m] }
    }

    pub fn swap(m: usize) -> Self {
        Self { reflectivities: vec![0.0; m] }
    }

    /// Named preset ("balanced", "identity", "swap") or a comma-separated r-vector.
    pub fn parse(spec: &str, m: usize) -> Result<Self> {
        match spec.trim() {
            "balanced" => Ok(Self::balanced(m)),
            "identity" => Ok(Self::identity(m)),
            "swap" => Ok(Self::swap(m)),
            list => {
                let r = list
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad reflectivity {x:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if r.len() != m {
                    return Err(Error::Dimension(format!("{} reflectivities for {m} modes", r.len())));
                }
                Self::new(r)
            }
        }
    }

    pub fn reflectivities(&self) -> &[f64] {
        &self.reflectivities
    }

    pub fn transmissivities(&self) -> Vec<f64> {
        self.reflectivities.iter().map(|r| (1.0 - r * r).max(0.0).sqrt()).collect()
    }

    pub fn len(&self) -> usize {
        self.reflectivities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflectivities.is_empty()
    }
}

/// Unitary on 2m modes (A first): the 2×2 block for pair (i, m+i) is [[r, t], [−t, r]].
pub fn beam_splitter_unitary(bs: &BeamSplitterArray) -> ModeUnitary {
    let m = bs.len();
    let t = bs.transmissivities();
    let mut u = CMat::zeros(2 * m, 2 * m);
    for (i, &r) in bs.reflectivities().iter().enumerate() {
        u[(i, i)] = C64::from(r);
        u[(i, m + i)] = C64::from(t[i]);
        u[(m + i, i)] = C64::from(-t[i]);
        u[(m + i, m + i)] = C64::from(r);
    }
    ModeUnitary { matrix: u }
}

pub fn measure_total_number(state: &BlockDiagonalState) -> BTreeMap<usize, (f64, BlockDiagonalState)> {
    state
        .blocks()
        .iter()
        .map(|b| {
            let post = BlockDiagonalState::from_parts(
                state.modes(),
                vec![Block { particles: b.particles, weight: 1.0, rho: b.rho.clone() }],
            );
            (b.particles, (b.weight, post))
        })
        .collect()
}

/// Operator on the Fock space of some modes truncated at `max_particles`; rows and
/// columns run over sectors 0, 1, …, max_particles in order.
#[derive(Clone, Debug)]
pub struct TruncatedFockOperator {
    modes: usize,
    max_particles: usize,
    matrix: CMat,
}

impl TruncatedFockOperator {
    pub fn new(modes: usize, max_particles: usize, matrix: CMat) -> Result<Self> {
        let dim = Self::space_dim(modes, max_particles);
        if matrix.shape() != (dim, dim) {
            return Err(Error::Dimension(format!("expected {dim}×{dim}, got {:?}", matrix.shape())));
        }
        Ok(Self { modes, max_particles, matrix })
    }

    /// Operator assembled from one block per particle number.
    pub fn from_number_blocks(modes: usize, blocks: &[CMat]) -> Result<Self> {
        let max_particles = blocks.len().checked_sub(1).ok_or_else(|| Error::InvalidInput("no blocks".into()))?;
        let dim = Self::space_dim(modes, max_particles);
        let mut matrix = CMat::zeros(dim, dim);
        let mut offset = 0;
        for (n, b) in blocks.iter().enumerate() {
            let d = crate::fock_core::sector_dim(modes, n);
            if b.shape() != (d, d) {
                return Err(Error::Dimension(format!("block {n} should be {d}×{d}")));
            }
            matrix.view_mut((offset, offset), (d, d)).copy_from(b);
            offset += d;
        }
        Ok(Self { modes, max_particles, matrix })
    }

    pub fn space_dim(modes: usize, max_particles: usize) -> usize {
        (0..=max_particles).map(|n| crate::fock_core::sector_dim(modes, n)).sum()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_particles(&self) -> usize {
        self.max_particles
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for n in 0..=self.max_particles {
            o.push(o[n] + crate::fock_core::sector_dim(self.modes, n));
        }
        o
    }

    /// Largest entry coupling different particle numbers.
    pub fn number_coherence(&self) -> f64 {
        let o = self.offsets();
        let sector = |i: usize| o.iter().position(|&x| x > i).unwrap() - 1;
        let mut worst = 0.0f64;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                if sector(i) != sector(j) {
                    worst = worst.max(self.matrix[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn number_block(&self, n: usize) -> CMat {
        let o = self.offsets();
        let d = o[n + 1] - o[n];
        self.matrix.view((o[n], o[n]), (d, d)).into_owned()
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub probability: f64,
    /// Post-measurement state of the A modes; `None` when the outcome has probability below 1e-14.
    pub post_state: Option<BlockDiagonalState>,
}

/// Destructive measurement of the B modes with a number-respecting POVM.
pub fn measure_destructive(
    state: &BlockDiagonalState,
    partition: &ModePartition,
    povm: &[TruncatedFockOperator],
) -> Result<Vec<MeasurementOutcome>> {
    if partition.modes() != state.modes() {
        return Err(Error::Dimension("partition does not match state".into()));
    }
    if partition.a_modes().is_empty() {
        return invalid("destructive measurement needs at least one retained mode");
    }
    let mb = partition.b_modes().len();
    let n_max = state.max_particles();
    let first = povm.first().ok_or_else(|| Error::InvalidInput("empty POVM".into()))?;
    let k_max = first.max_particles();
    if povm.iter().any(|e| e.modes() != mb || e.max_particles() != k_max) {
        return Err(Error::Dimension("POVM elements must act on the B modes with one truncation".into()));
    }
    if k_max < n_max {
        return invalid(format!("POVM truncated at {k_max} particles, state reaches {n_max}"));
    }
    let dim = first.matrix().nrows();
    let mut sum = CMat::zeros(dim, dim);
    for (k, e) in povm.iter().enumerate() {
        let coh = e.number_coherence();
        if coh > 1e-10 {
            return Err(Error::NotSsrRespecting(format!("POVM element {k} couples particle numbers ({coh:.3e})")));
        }
        if linalg::hermitian_deviation(e.matrix()) > 1e-10 {
            return invalid(format!("POVM element {k} is not Hermitian"));
        }
        if linalg::eigvalsh(e.matrix()).first().copied().unwrap_or(0.0) < -1e-10 {
            return invalid(format!("POVM element {k} is not positive"));
        }
        sum += e.matrix();
    }
    if linalg::max_abs_diff(&sum, &CMat::identity(dim, dim)) > 1e-10 {
        return invalid("POVM elements do not sum to the identity");
    }

    let sides = SideBases::new(partition, n_max);
    let splits: Vec<_> = state
        .blocks()
        .iter()
        .map(|b| split_sector(&FockBasis::build(state.modes(), b.particles), partition, &sides))
        .collect();
    let ma = partition.a_modes().len();
    povm.iter()
        .map(|e| {
            let e_blocks: Vec<CMat> = (0..=n_max).map(|n| e.number_block(n)).collect();
            let mut acc: BTreeMap<usize, CMat> = BTreeMap::new();
            for (b, split) in state.blocks().iter().zip(&splits) {
                let n = b.particles;
                for (k, sk) in split.iter().enumerate() {
                    for (l, sl) in split.iter().enumerate() {
                        if sk.n_a != sl.n_a {
                            continue;
                        }
                        let eb = &e_blocks[n - sk.n_a];
                        let coef = eb[(sl.ib, sk.ib)];
                        if coef == ZERO {
                            continue;
                        }
                        let d = sides.a(sk.n_a).len();
                        let t = acc.entry(sk.n_a).or_insert_with(|| CMat::zeros(d, d));
                        t[(sk.ia, sl.ia)] += b.rho[(k, l)] * coef * b.weight;
                    }
                }
            }
            let probability: f64 = acc.values().map(|m| linalg::trace(m).re).sum();
            let post_state = if probability >= 1e-14 {
                Some(BlockDiagonalState::from_unnormalized(ma, acc.into_iter().collect())?)
            } else {
                None
            };
            Ok(MeasurementOutcome { probability: probability.max(0.0), post_state })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_core::PureSectorState;
    use crate::linalg::c;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    fn fifty_fifty() -> ModeUnitary {
        ModeUnitary::new(CMat::from_row_slice(2, 2, &[c(H, 0.0), c(H, 0.0), c(-H, 0.0), c(H, 0.0)])).unwrap()
    }

    #[test]
    fn single_particle_through_fifty_fifty() {
        let u = lift_unitary(&fifty_fifty(), 1);
        // column of |1,0⟩
        assert!((u[(0, 0)] - c(H, 0.0)).norm() < 1e-15);
        assert!((u[(1, 0)] - c(-H, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let u = lift_unitary(&fifty_fifty(), 2);
        // |1,1⟩ is index 1 in [(2,0),(1,1),(0,2)]
        assert!((u[(0, 1)] - c(H, 0.0)).norm() < 1e-15);
        assert!(u[(1, 1)].norm() < 1e-15);
        assert!((u[(2, 1)] - c(-H, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_lifts_to_identity() {
        for n in 0..4 {
            let u = lift_unitary(&ModeUnitary::identity(3), n);
            assert_eq!(u, CMat::identity(u.nrows(), u.nrows()));
        }
    }

    #[test]
    fn non_unitary_rejected() {
        assert!(ModeUnitary::new(CMat::from_element(2, 2, c(1.0, 0.0))).is_err());
        assert!(ModeUnitary::new(CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn beam_splitter_presets() {
        assert_eq!(beam_splitter_unitary(&BeamSplitterArray::identity(2)), ModeUnitary::identity(4));
        let s = beam_splitter_unitary(&BeamSplitterArray::swap(1));
        assert_eq!(s.matrix()[(0, 1)], c(1.0, 0.0));
        assert_eq!(s.matrix()[(1, 0)], c(-1.0, 0.0));
        let b = beam_splitter_unitary(&BeamSplitterArray::balanced(1));
        assert!(linalg::max_abs_diff(b.matrix(), fifty_fifty().matrix()) < 1e-15);
        assert!(BeamSplitterArray::new(vec![1.2]).is_err());
        assert_eq!(BeamSplitterArray::parse("0.6, 0.8", 2).unwrap().reflectivities(), &[0.6, 0.8]);
        assert!(BeamSplitterArray::parse("0.6", 2).is_err());
    }

    #[test]
    fn vacuum_append_and_trace() {
        let one = BlockDiagonalState::fock(&[1]).unwrap();
        let s = append_vacuum(&one, 1).unwrap();
        assert_eq!(s, BlockDiagonalState::fock(&[1, 0]).unwrap());
        assert_eq!(trace_out(&s, &[0]).unwrap(), one);
        assert!(append_vacuum(&one, 0).is_err());
    }

    #[test]
    fn total_number_measurement() {
        let s = BlockDiagonalState::new(
            1,
            vec![(0, 0.5, CMat::identity(1, 1)), (2, 0.5, CMat::identity(1, 1))],
        )
        .unwrap();
        let out = measure_total_number(&s);
        assert_eq!(out.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(out[&2].0, 0.5);
        assert_eq!(out[&2].1, BlockDiagonalState::fock(&[2]).unwrap());
        let again = measure_total_number(&out[&2].1);
        assert_eq!(again[&2].0, 1.0);
    }

    #[test]
    fn measuring_b_number() {
        let b = FockBasis::new(2, 1).unwrap();
        let s = PureSectorState::normalized(b, crate::linalg::CVec::from_element(2, c(1.0, 0.0))).unwrap().to_state();
        let p = ModePartition::new(vec![0], vec![1]).unwrap();
        let e0 = TruncatedFockOperator::from_number_blocks(1, &[CMat::identity(1, 1), CMat::zeros(1, 1)]).unwrap();
        let e1 = TruncatedFockOperator::from_number_blocks(1, &[CMat::zeros(1, 1), CMat::identity(1, 1)]).unwrap();
        let out = measure_destructive(&s, &p, &[e0, e1]).unwrap();
        assert!((out[0].probability - 0.5).abs() < 1e-15);
        assert_eq!(out[0].post_state.as_ref().unwrap(), &BlockDiagonalState::fock(&[1]).unwrap());
        assert_eq!(out[1].post_state.as_ref().unwrap(), &BlockDiagonalState::vacuum(1));
    }

    #[test]
    fn coherent_povm_rejected() {
        let b = FockBasis::new(2, 1).unwrap();
        let s = PureSectorState::normalized(b, crate::linalg::CVec::from_element(2, c(1.0, 0.0))).unwrap().to_state();
        let p = ModePartition::new(vec![0], vec![1]).unwrap();
        let plus = CMat::from_element(2, 2, c(0.5, 0.0));
        let minus = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)]);
        let povm = [
            TruncatedFockOperator::new(1, 1, plus).unwrap(),
            TruncatedFockOperator::new(1, 1, minus).unwrap(),
        ];
        assert!(matches!(measure_destructive(&s, &p, &povm), Err(Error::NotSsrRespecting(_))));
    }

    #[test]
    fn unitary_json_round_trip() {
        let u = fifty_fifty();
        assert_eq!(ModeUnitary::from_json(&u.to_json().unwrap()).unwrap(), u);
    }
}
