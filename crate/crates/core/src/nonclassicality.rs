//! Multi-copy activation of classical and nonclassical states, the binomial–Poisson
//! distance, the exchangeable de Finetti approximation and the many-copy nonclassicality bound.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::activation::{activate, decide_particle_separable, ActivationSpec};
use crate::error::{invalid, Error, Result};
use crate::fock_core::{tensor_compose_with, BlockDiagonalState, FockBasis, Limits};
use crate::linalg::{self, c, C64, CMat, CVec};
use crate::resource_states::{coherent_spin_state, poisson_cdf, poisson_pmf, ClassicalSpec, CoherentSpinSpec};

#[derive(Clone, Debug, Serialize)]
pub struct TwoCopyReport {
    pub single_copy_e_ssr: f64,
    pub two_copy_e_ssr: f64,
    /// (N_A, N_B, probability, negativity) of each sector of the two-copy activation.
    pub sectors: Vec<(usize, usize, f64, f64)>,
    pub single_copy_particle_separable: Option<bool>,
    pub two_copies_particle_separable: Option<bool>,
}

/// Activates one and two copies of `state` through balanced arrays. The two-copy input is
/// ρ ⊗ ρ on 2m modes, so side A holds the A outputs of both copies.
pub fn two_copy_pe_check(state: &BlockDiagonalState, limits: &Limits) -> Result<TwoCopyReport> {
    let joint = tensor_compose_with(state, state, limits)?;
    let one = activate(&ActivationSpec::balanced_with_limits(state.clone(), *limits)?)?;
    let two = activate(&ActivationSpec::balanced_with_limits(joint.clone(), *limits)?)?;
    Ok(TwoCopyReport {
        single_copy_e_ssr: one.e_ssr_negativity,
        two_copy_e_ssr: two.e_ssr_negativity,
        sectors: two.sectors.iter().map(|s| (s.n_a, s.n_b, s.probability, s.negativity)).collect(),
        single_copy_particle_separable: decide_particle_separable(state),
        two_copies_particle_separable: decide_particle_separable(&joint),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BinomialPoissonReport {
    pub distance: f64,
    pub bound: f64,
    pub satisfied: bool,
}

fn ln_binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

fn ln_poisson_pmf(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mu + k as f64 * mu.ln() - statrs::function::factorial::ln_factorial(k)
}

/// Total-variation distance between Binomial(N, p) and Poisson(Np).
pub fn binomial_poisson_distance(n: u64, p: f64) -> Result<BinomialPoissonReport> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("probability {p} outside [0, 1]"));
    }
    if n == 0 {
        return invalid("need at least one trial");
    }
    let mu = n as f64 * p;
    let mut diff = 0.0;
    let mut poisson_mass = 0.0;
    for k in 0..=n {
        let b = ln_binomial_pmf(n, p, k).exp();
        let q = ln_poisson_pmf(mu, k).exp();
        poisson_mass += q;
        diff += (b - q).abs();
    }
    let distance = 0.5 * (diff + (1.0 - poisson_mass).max(0.0));
    Ok(BinomialPoissonReport { distance, bound: p, satisfied: distance <= p + 1e-12 })
}

/// Exchangeable particle-separable state Σ_λ q_λ |c_λ^N⟩⟨c_λ^N| of N particles on m modes.
#[derive(Clone, Debug)]
pub struct ExchangeableSeparableSpec {
    particles: usize,
    modes: usize,
    terms: Vec<(f64, CVec)>,
}

fn check_terms(terms: &[(f64, CVec)], modes: usize) -> Result<()> {
    if terms.is_empty() {
        return invalid("empty mixture");
    }
    if terms.iter().any(|(q, v)| !(*q >= 0.0) || v.len() != modes) {
        return invalid(format!("every term needs a nonnegative weight and {modes} amplitudes"));
    }
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("weights sum to {total}"));
    }
    if terms.iter().any(|(_, v)| (v.norm() - 1.0).abs() > 1e-12) {
        return invalid("amplitude vectors must have unit norm");
    }
    Ok(())
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

impl ExchangeableSeparableSpec {
    /// Terms must have equal amplitude magnitude on every mode.
    pub fn new(particles: usize, terms: Vec<(f64, CVec)>) -> Result<Self> {
        let modes = terms.first().map(|t| t.1.len()).unwrap_or(0);
        if modes == 0 {
            return invalid("need at least one mode");
        }
        check_terms(&terms, modes)?;
        let uniform = 1.0 / (modes as f64).sqrt();
        if terms.iter().any(|(_, v)| v.iter().any(|z| (z.norm() - uniform).abs() > 1e-12)) {
            return invalid("amplitudes must have magnitude 1/√m on every mode; use `symmetrized` otherwise");
        }
        Ok(Self { particles, modes, terms })
    }

    /// Average of the mixture over all permutations of the modes.
    pub fn symmetrized(particles: usize, terms: Vec<(f64, CVec)>) -> Result<Self> {
        let modes = terms.first().map(|t| t.1.len()).unwrap_or(0);
        if modes == 0 {
            return invalid("need at least one mode");
        }
        check_terms(&terms, modes)?;
        let perms = permutations(modes);
        if perms.len() * terms.len() > 5040 {
            return Err(Error::CapExceeded(format!("{} permuted terms", perms.len() * terms.len())));
        }
        let scale = 1.0 / perms.len() as f64;
        let terms = terms
            .iter()
            .flat_map(|(q, v)| perms.iter().map(move |p| (q * scale, CVec::from_fn(v.len(), |i, _| v[p[i]]))))
            .collect();
        Ok(Self { particles, modes, terms })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> &[(f64, CVec)] {
        &self.terms
    }

    pub fn state(&self) -> Result<BlockDiagonalState> {
        let d = FockBasis::build(self.modes, self.particles).len();
        let mut rho = CMat::zeros(d, d);
        for (q, v) in &self.terms {
            rho += coherent_spin_state(&CoherentSpinSpec::new(v.clone(), self.particles)?).density_matrix() * c(*q, 0.0);
        }
        BlockDiagonalState::from_unnormalized(self.modes, vec![(self.particles, rho)])
    }
}

/// Restriction of a term to the retained modes: (weight p = |α|², normalized direction).
fn restrict(v: &CVec, l: usize) -> (f64, Option<CVec>) {
    let a = CVec::from_fn(l, |i, _| v[i]);
    let p = a.norm_squared();
    if p < 1e-300 {
        (0.0, None)
    } else {
        let n = a.norm();
        (p, Some(a / C64::from(n)))
    }
}

fn css_density(dir: &Option<CVec>, l: usize, k: usize) -> Result<CMat> {
    match dir {
        Some(d) => Ok(coherent_spin_state(&CoherentSpinSpec::new(d.clone(), k)?).density_matrix()),
        None => {
            let mut z = CMat::zeros(FockBasis::build(l, k).len(), FockBasis::build(l, k).len());
            if k == 0 {
                z[(0, 0)] = c(1.0, 0.0);
            }
            Ok(z)
        }
    }
}

/// Blocks of Σ_λ q_λ Σ_{k≤N} w_λ(k) |k^(λ)⟩⟨k^(λ)| for weights w.
fn binned_mixture(
    terms: &[(f64, f64, Option<CVec>)],
    l: usize,
    n_max: usize,
    weight: impl Fn(f64, usize) -> f64,
) -> Result<BTreeMap<usize, CMat>> {
    let mut blocks = BTreeMap::new();
    for k in 0..=n_max {
        let d = FockBasis::build(l, k).len();
        let mut b = CMat::zeros(d, d);
        for (q, p, dir) in terms {
            let w = q * weight(*p, k);
            if w != 0.0 {
                b += css_density(dir, l, k)? * c(w, 0.0);
            }
        }
        blocks.insert(k, b);
    }
    Ok(blocks)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeFinettiReport {
    /// Exact reduced state on the first l modes.
    pub rho_l: BlockDiagonalState,
    /// Poissonized classical approximation, truncated at N particles and renormalized.
    pub sigma_l: BlockDiagonalState,
    /// Trace distance to the untruncated classical approximation.
    pub distance: f64,
    pub bound: f64,
    /// Poisson mass of the approximation above N particles.
    pub truncation_mass: f64,
    pub satisfied: bool,
}

/// Reduced state of an exchangeable separable state on l modes and its Poissonized classical
/// counterpart; the distance includes the Poisson tail above N exactly.
pub fn definetti_classical_approx(spec: &ExchangeableSeparableSpec, l: usize) -> Result<DeFinettiReport> {
    let (n, m) = (spec.particles, spec.modes);
    if l == 0 || l > m {
        return invalid(format!("need 1 ≤ l ≤ m = {m}, got l = {l}"));
    }
    let terms: Vec<(f64, f64, Option<CVec>)> = spec
        .terms
        .iter()
        .map(|(q, v)| {
            let (p, dir) = restrict(v, l);
            (*q, p, dir)
        })
        .collect();
    let binom = binned_mixture(&terms, l, n, |p, k| (ln_binomial_pmf(n as u64, p.min(1.0), k as u64)).exp())?;
    let pois = binned_mixture(&terms, l, n, |p, k| poisson_pmf(n as f64 * p, k))?;
    let tail: f64 = terms.iter().map(|(q, p, _)| q * (1.0 - poisson_cdf(n as f64 * p, n)).max(0.0)).sum();
    let mut distance = 0.5 * tail;
    for k in 0..=n {
        distance += 0.5 * linalg::trace_norm_hermitian(&(&binom[&k] - &pois[&k]));
    }
    let rho_l = BlockDiagonalState::from_unnormalized(l, binom.into_iter().collect())?;
    let sigma_l = BlockDiagonalState::from_unnormalized(l, pois.into_iter().collect())?;
    let bound = l as f64 / m as f64;
    Ok(DeFinettiReport { rho_l, sigma_l, distance, bound, truncation_mass: tail, satisfied: distance <= bound + 1e-12 })
}

#[derive(Clone, Debug)]
pub struct KCopyBlock {
    pub particles: usize,
    pub probability: f64,
    /// (q, c) with c a unit vector on copies × copy_modes modes.
    pub terms: Vec<(f64, CVec)>,
}

/// Claimed particle-separable decomposition of the number blocks of ρ^⊗k.
#[derive(Clone, Debug)]
pub struct KCopyDecomposition {
    copy_modes: usize,
    copies: usize,
    blocks: Vec<KCopyBlock>,
    /// Classical state known to be close to ρ, with its own distance allowance.
    reference: Option<(BlockDiagonalState, f64)>,
}

impl KCopyDecomposition {
    pub fn new(copy_modes: usize, copies: usize, blocks: Vec<KCopyBlock>) -> Result<Self> {
        if copy_modes == 0 || copies == 0 {
            return invalid("need at least one mode and one copy");
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &blocks {
            if !seen.insert(b.particles) {
                return invalid(format!("duplicate block N={}", b.particles));
            }
            if !(b.probability >= 0.0) {
                return invalid("negative block probability");
            }
            check_terms(&b.terms, copy_modes * copies)?;
        }
        let total: f64 = blocks.iter().map(|b| b.probability).sum();
        if total > 1.0 + 1e-12 {
            return invalid(format!("block probabilities sum to {total} > 1"));
        }
        Ok(Self { copy_modes, copies, blocks, reference: None })
    }

    /// Decomposition of the k-copy power of a classical state into coherent spin states,
    /// using N+1 relative phases per copy, over the blocks N ≤ n_cap.
    pub fn from_classical(spec: &ClassicalSpec, copies: usize, n_cap: usize, limits: &Limits) -> Result<Self> {
        let d = spec.modes();
        limits.check(d * copies, n_cap)?;
        let mut tuples: Vec<(f64, Vec<&CVec>)> = vec![(1.0, vec![])];
        for _ in 0..copies {
            tuples = tuples
                .into_iter()
                .flat_map(|(w, t)| {
                    spec.terms().iter().map(move |(wj, a)| {
                        let mut t = t.clone();
                        t.push(a);
                        (w * wj, t)
                    })
                })
                .collect();
        }
        let mut blocks = Vec::new();
        for n in 0..=n_cap {
            let grid = n + 1;
            let phases = grid.pow(copies.saturating_sub(1) as u32);
            if phases * tuples.len() > 200_000 {
                return Err(Error::CapExceeded(format!("{} decomposition terms", phases * tuples.len())));
            }
            let mut terms = Vec::new();
            let mut probability = 0.0;
            for (w, t) in &tuples {
                let mu: f64 = t.iter().map(|a| a.norm_squared()).sum();
                let p = w * poisson_pmf(mu, n);
                if p == 0.0 {
                    continue;
                }
                probability += p;
                for idx in 0..phases {
                    let mut rest = idx;
                    let mut v = CVec::zeros(d * copies);
                    for (j, a) in t.iter().enumerate() {
                        let phase = if j == 0 {
                            0.0
                        } else {
                            let s = rest % grid;
                            rest /= grid;
                            2.0 * std::f64::consts::PI * s as f64 / grid as f64
                        };
                        let z = C64::from_polar(1.0, phase);
                        for i in 0..d {
                            v[j * d + i] = a[i] * z;
                        }
                    }
                    let norm = v.norm();
                    let v = if norm > 0.0 { v / C64::from(norm) } else { CVec::from_fn(d * copies, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) }) };
                    terms.push((p / phases as f64, v));
                }
            }
            if probability > 0.0 {
                for t in &mut terms {
                    t.0 /= probability;
                }
                blocks.push(KCopyBlock { particles: n, probability, terms });
            }
        }
        let mut out = Self::new(d, copies, blocks)?;
        let n_max = n_cap.min(limits.max_particles);
        let reference = crate::resource_states::classical_nd_state(spec, Some(n_max), limits).ok();
        out.reference = reference.map(|r| (r.state, r.truncation_mass));
        Ok(out)
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn copy_modes(&self) -> usize {
        self.copy_modes
    }

    pub fn blocks(&self) -> &[KCopyBlock] {
        &self.blocks
    }

    pub fn covered_probability(&self) -> f64 {
        self.blocks.iter().map(|b| b.probability).sum()
    }

    fn block_density(&self, b: &KCopyBlock) -> Result<CMat> {
        let dim = FockBasis::build(self.copy_modes * self.copies, b.particles).len();
        let mut rho = CMat::zeros(dim, dim);
        for (q, v) in &b.terms {
            rho += coherent_spin_state(&CoherentSpinSpec::new(v.clone(), b.particles)?).density_matrix() * c(*q, 0.0);
        }
        Ok(rho)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    /// The decomposition reproduces the computed blocks of ρ^⊗k.
    Verified,
    /// ρ^⊗k was too large to compute or differs from the decomposition; the bound is conditional.
    Conditional,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManyCopyReport {
    pub copies: usize,
    /// Trace distance from ρ to the assembled classical approximation.
    pub construction_distance: f64,
    /// Mass of ρ^⊗k outside the decomposed blocks, replaced by vacuum in the approximation.
    pub uncovered_mass: f64,
    pub classical_distance_upper_bound: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub hypothesis: Hypothesis,
    /// Largest entry deviation between ρ^⊗k and the decomposition, when computable.
    pub decomposition_mismatch: Option<f64>,
}

fn check_hypothesis(state: &BlockDiagonalState, dec: &KCopyDecomposition, limits: &Limits) -> Result<Option<f64>> {
    let k = dec.copies;
    if limits.check(state.modes() * k, state.max_particles() * k).is_err() {
        return Ok(None);
    }
    let mut power = state.clone();
    for _ in 1..k {
        power = tensor_compose_with(&power, state, limits)?;
    }
    let mut worst = 0.0f64;
    for b in &dec.blocks {
        let target = power.block(b.particles);
        let claimed = dec.block_density(b)? * c(b.probability, 0.0);
        let dev = match target {
            Some(t) => linalg::max_abs_diff(&(&t.rho * c(t.weight, 0.0)), &claimed),
            None => claimed.iter().map(|z| z.norm()).fold(0.0, f64::max),
        };
        worst = worst.max(dev);
    }
    let covered: Vec<usize> = dec.blocks.iter().map(|b| b.particles).collect();
    for b in power.blocks().iter().filter(|b| !covered.contains(&b.particles)) {
        worst = worst.max(b.weight);
    }
    Ok(Some(worst))
}

/// Runs the many-copy construction: the first-copy de Finetti approximation of each number
/// block of ρ^⊗k, weighted by the block probabilities, compared with ρ.
pub fn many_copy_nc_bound_check(state: &BlockDiagonalState, dec: &KCopyDecomposition, limits: &Limits) -> Result<ManyCopyReport> {
    let d = dec.copy_modes;
    if state.modes() != d {
        return Err(Error::Dimension(format!("state has {} modes, decomposition copies have {d}", state.modes())));
    }
    let k = dec.copies;
    let n_top = state.max_particles();
    // first-copy Poissonized mixture, blocks 0..=n_top kept, tail summed analytically
    let mut terms: Vec<(f64, f64, f64, Option<CVec>)> = Vec::new();
    for b in &dec.blocks {
        for (q, v) in &b.terms {
            let (p, dir) = restrict(v, d);
            terms.push((b.probability * q, b.particles as f64 * p, p, dir));
        }
    }
    let uncovered_mass = (1.0 - dec.covered_probability()).max(0.0);
    let mut distance = 0.0;
    let mut tail = 0.0;
    for (w, mu, _, _) in &terms {
        tail += w * (1.0 - poisson_cdf(*mu, n_top)).max(0.0);
    }
    for n in 0..=n_top {
        let dim = FockBasis::build(d, n).len();
        let mut sigma = CMat::zeros(dim, dim);
        for (w, mu, _, dir) in &terms {
            let x = w * poisson_pmf(*mu, n);
            if x != 0.0 {
                sigma += css_density(dir, d, n)? * c(x, 0.0);
            }
        }
        if n == 0 {
            sigma[(0, 0)] += c(uncovered_mass, 0.0);
        }
        let rho = state.block(n).map(|b| &b.rho * c(b.weight, 0.0)).unwrap_or_else(|| CMat::zeros(dim, dim));
        distance += 0.5 * linalg::trace_norm_hermitian(&(rho - sigma));
    }
    distance += 0.5 * tail;
    let mismatch = check_hypothesis(state, dec, limits)?;
    let hypothesis = match mismatch {
        Some(x) if x <= 1e-9 => Hypothesis::Verified,
        _ => Hypothesis::Conditional,
    };
    let mut upper = distance;
    if let Some((reference, allowance)) = &dec.reference {
        upper = upper.min(crate::measures::block_trace_distance(state, reference)? + allowance);
    }
    let bound = 1.0 / k as f64;
    Ok(ManyCopyReport {
        copies: k,
        construction_distance: distance,
        uncovered_mass,
        classical_distance_upper_bound: upper,
        bound,
        satisfied: distance <= bound + uncovered_mass + 1e-12,
        hypothesis,
        decomposition_mismatch: mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_poisson_examples() {
        assert_eq!(binomial_poisson_distance(10, 0.0).unwrap().distance, 0.0);
        let r = binomial_poisson_distance(20, 0.1).unwrap();
        assert!(r.satisfied && r.distance > 0.0 && r.distance <= 0.1);
        assert!(binomial_poisson_distance(100, 0.05).unwrap().satisfied);
        assert!(binomial_poisson_distance(10, 1.5).is_err());
    }

    #[test]
    fn definetti_uniform_single_term() {
        let v = CVec::from_element(4, c(0.5, 0.0));
        let spec = ExchangeableSeparableSpec::new(4, vec![(1.0, v)]).unwrap();
        let r = definetti_classical_approx(&spec, 1).unwrap();
        assert!(r.satisfied && r.distance <= 0.25);
        assert!((r.rho_l.mean_particles() - 1.0).abs() < 1e-12);
        assert!(ExchangeableSeparableSpec::new(2, vec![(1.0, CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]))]).is_err());
    }

    #[test]
    fn symmetrized_means_are_uniform() {
        let v = CVec::from_vec(vec![c(0.8, 0.0), c(0.6, 0.0), c(0.0, 0.0)]);
        let spec = ExchangeableSeparableSpec::symmetrized(3, vec![(1.0, v)]).unwrap();
        assert_eq!(spec.terms().len(), 6);
        let r = definetti_classical_approx(&spec, 2).unwrap();
        assert!((r.rho_l.mean_particles() - 2.0).abs() < 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn two_copy_single_particle() {
        let r = two_copy_pe_check(&BlockDiagonalState::fock(&[1]).unwrap(), &Limits::default()).unwrap();
        assert!(r.single_copy_e_ssr < 1e-12);
        assert!(r.two_copy_e_ssr > 1e-6);
        assert_eq!(r.two_copies_particle_separable, Some(false));
        let v = two_copy_pe_check(&BlockDiagonalState::vacuum(1), &Limits::default()).unwrap();
        assert_eq!(v.two_copy_e_ssr, 0.0);
    }

    #[test]
    fn many_copy_classical() {
        let spec = ClassicalSpec::single(CVec::from_vec(vec![c(0.2, 0.0)]));
        let limits = Limits::default();
        let state = crate::resource_states::classical_nd_state(&spec, Some(3), &limits).unwrap().state;
        let dec = KCopyDecomposition::from_classical(&spec, 2, 6, &limits).unwrap();
        let r = many_copy_nc_bound_check(&state, &dec, &limits).unwrap();
        assert!(r.satisfied);
        assert!(r.classical_distance_upper_bound < 1e-5);
        let one = KCopyDecomposition::from_classical(&spec, 1, 3, &limits).unwrap();
        assert!(many_copy_nc_bound_check(&state, &one, &limits).unwrap().satisfied);
    }
}
