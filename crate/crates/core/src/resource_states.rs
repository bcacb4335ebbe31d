//! Free states (mixtures of coherent spin states), classical number-diagonal states,
//! benchmark states and the few separability decisions that are exact at desk scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fock_core::{factorial, single_particle_rdm, BlockDiagonalState, FockBasis, Limits, PureSectorState};
use crate::linalg::{self, c, C64, CMat, CVec, ZERO};

#[derive(Clone, Debug)]
pub struct CoherentSpinSpec {
    psi: CVec,
    particles: usize,
}

impl CoherentSpinSpec {
    pub fn new(psi: CVec, particles: usize) -> Result<Self> {
        if psi.is_empty() {
            return invalid("empty mode function");
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("mode function has norm {norm}"));
        }
        Ok(Self { psi, particles })
    }

    pub fn normalized(psi: CVec, particles: usize) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return invalid("zero mode function");
        }
        Self::new(psi / C64::from(norm), particles)
    }

    pub fn psi(&self) -> &CVec {
        &self.psi
    }

    pub fn particles(&self) -> usize {
        self.particles
    }
}

/// (Σ_i ψ_i a_i†)^N |0⟩ / √N!, first nonzero amplitude real positive.
pub fn coherent_spin_state(spec: &CoherentSpinSpec) -> PureSectorState {
    let m = spec.psi.len();
    let n = spec.particles;
    let basis = FockBasis::build(m, n);
    let nf = factorial(n);
    let amps = CVec::from_iterator(
        basis.len(),
        basis.states().iter().map(|occ| {
            let multinom = nf / occ.iter().map(|&k| factorial(k)).product::<f64>();
            let mono: C64 = occ.iter().zip(spec.psi.iter()).map(|(&k, &z)| z.powu(k as u32)).product();
            mono * multinom.sqrt()
        }),
    );
    PureSectorState::normalized(basis, amps)
        .expect("coherent spin amplitudes have unit norm")
        .with_canonical_phase()
}

#[derive(Clone, Debug)]
pub struct SeparableMixtureSpec {
    terms: Vec<(f64, CoherentSpinSpec)>,
}

impl SeparableMixtureSpec {
    pub fn new(terms: Vec<(f64, CoherentSpinSpec)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        let (m, n) = (first.1.psi.len(), first.1.particles);
        if terms.iter().any(|(_, s)| s.psi.len() != m || s.particles != n) {
            return invalid("mixture terms must share the mode count and particle number");
        }
        if terms.iter().any(|(w, _)| !(*w >= 0.0)) {
            return invalid("negative mixture weight");
        }
        let total: f64 = terms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("mixture weights sum to {total}"));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, CoherentSpinSpec)] {
        &self.terms
    }
}

pub fn particle_separable_mixture(spec: &SeparableMixtureSpec) -> BlockDiagonalState {
    let (_, first) = &spec.terms[0];
    let m = first.psi.len();
    let n = first.particles;
    let dim = crate::fock_core::sector_dim(m, n);
    let mut rho = CMat::zeros(dim, dim);
    for (w, s) in &spec.terms {
        rho += coherent_spin_state(s).density_matrix() * C64::from(*w);
    }
    BlockDiagonalState::from_unnormalized(m, vec![(n, rho)]).expect("positive mixture")
}

/// Mixture of `k` coherent spin states with random directions and weights.
pub fn random_particle_separable(m: usize, n: usize, k: usize, seed: u64) -> Result<BlockDiagonalState> {
    if m == 0 || k == 0 {
        return invalid("need m ≥ 1 and k ≥ 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let terms = raw
        .iter()
        .map(|w| Ok((w / total, CoherentSpinSpec::new(linalg::random_unit_vector(m, &mut rng), n)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut spec = SeparableMixtureSpec { terms };
    // exact normalization of the weights
    let s: f64 = spec.terms.iter().map(|t| t.0).sum();
    spec.terms.iter_mut().for_each(|t| t.0 /= s);
    Ok(particle_separable_mixture(&spec))
}

/// A pure symmetric state is a coherent spin state iff its single-particle reduced state is pure.
pub fn is_coherent_spin_pure(s: &PureSectorState, tol: f64) -> Result<bool> {
    let rdm = single_particle_rdm(s)?;
    Ok(linalg::purity(&rdm) >= 1.0 - tol)
}

/// Maps the two-mode N=2 sector onto the symmetric subspace of two qubits.
pub fn two_qubit_embedding() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // columns |2,0⟩, |1,1⟩, |0,2⟩; rows |00⟩, |01⟩, |10⟩, |11⟩
    CMat::from_row_slice(
        4,
        3,
        &[
            c(1.0, 0.0), ZERO, ZERO,
            ZERO, c(h, 0.0), ZERO,
            ZERO, c(h, 0.0), ZERO,
            ZERO, ZERO, c(1.0, 0.0),
        ],
    )
}

pub fn partial_transpose_qubits(rho: &CMat) -> CMat {
    CMat::from_fn(4, 4, |r, col| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (col / 2, col % 2);
        rho[(a2 * 2 + b, a * 2 + b2)]
    })
}

/// Exact particle-separability test for a two-mode, two-particle block (PPT on the
/// first-quantized two-qubit embedding).
pub fn is_particle_separable_two_qubit(modes: usize, particles: usize, block: &CMat) -> Result<bool> {
    if modes != 2 || particles != 2 {
        return Err(Error::Undecidable);
    }
    if block.shape() != (3, 3) {
        return Err(Error::Dimension("two-mode N=2 block must be 3×3".into()));
    }
    let v = two_qubit_embedding();
    let rho = &v * block * v.adjoint();
    let min = linalg::eigvalsh(&partial_transpose_qubits(&rho))[0];
    Ok(min >= -1e-10)
}

/// Smallest truncation with retained Poisson mass ≥ 1 − 1e-6, starting from ⌈μ + 6√μ⌉.
pub fn default_truncation(mu: f64) -> usize {
    let mut n = (mu + 6.0 * mu.sqrt()).ceil() as usize;
    while poisson_cdf(mu, n) < 1.0 - 1e-6 {
        n += 1;
    }
    n
}

pub fn poisson_pmf(mu: f64, k: usize) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu + k as f64 * mu.ln() - statrs::function::factorial::ln_factorial(k as u64)).exp()
}

pub fn poisson_cdf(mu: f64, n: usize) -> f64 {
    (0..=n).map(|k| poisson_pmf(mu, k)).sum()
}

/// Weighted mixture of coherent amplitudes α; each term is Φ(|α⟩⟨α|).
#[derive(Clone, Debug)]
pub struct ClassicalSpec {
    terms: Vec<(f64, CVec)>,
}

impl ClassicalSpec {
    pub fn single(alpha: CVec) -> Self {
        Self { terms: vec![(1.0, alpha)] }
    }

    pub fn mixture(terms: Vec<(f64, CVec)>) -> Result<Self> {
        let m = terms.first().map(|t| t.1.len()).ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        if m == 0 || terms.iter().any(|t| t.1.len() != m) {
            return invalid("all amplitude vectors need the same positive length");
        }
        if terms.iter().any(|t| !(t.0 >= 0.0)) {
            return invalid("negative weight");
        }
        let total: f64 = terms.iter().map(|t| t.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("weights sum to {total}"));
        }
        Ok(Self { terms })
    }

    pub fn modes(&self) -> usize {
        self.terms[0].1.len()
    }

    pub fn terms(&self) -> &[(f64, CVec)] {
        &self.terms
    }

    pub fn max_mean(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_squared()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ClassicalState {
    pub state: BlockDiagonalState,
    pub truncation: usize,
    /// Poisson mass discarded by the truncation before renormalization.
    pub truncation_mass: f64,
}

/// Number-dephased coherent states, truncated at `n_max` particles and renormalized.
pub fn classical_nd_state(spec: &ClassicalSpec, n_max: Option<usize>, limits: &Limits) -> Result<ClassicalState> {
    let m = spec.modes();
    let n_max = n_max.unwrap_or_else(|| default_truncation(spec.max_mean()));
    let mut blocks: BTreeMap<usize, CMat> = BTreeMap::new();
    let mut retained = 0.0;
    for (w, alpha) in &spec.terms {
        let mu = alpha.norm_squared();
        if mu == 0.0 {
            retained += w;
            let b = blocks.entry(0).or_insert_with(|| CMat::zeros(1, 1));
            b[(0, 0)] += C64::from(*w);
            continue;
        }
        let dir = CoherentSpinSpec::normalized(alpha.clone(), 0)?;
        for k in 0..=n_max {
            let pk = w * poisson_pmf(mu, k);
            if pk == 0.0 {
                continue;
            }
            retained += pk;
            let css = coherent_spin_state(&CoherentSpinSpec { psi: dir.psi.clone(), particles: k });
            let d = css.basis().len();
            let b = blocks.entry(k).or_insert_with(|| CMat::zeros(d, d));
            *b += css.density_matrix() * C64::from(pk);
        }
    }
    if retained < 1.0 - 1e-6 {
        return Err(Error::Truncation { retained, required: 1.0 - 1e-6 });
    }
    let top = blocks.keys().max().copied().unwrap_or(0);
    limits.check(m, top)?;
    let state = BlockDiagonalState::from_unnormalized(m, blocks.into_iter().collect())?;
    Ok(ClassicalState { state, truncation: n_max, truncation_mass: (1.0 - retained).max(0.0) })
}

/// (|N,0⟩ + |0,N⟩)/√2.
pub fn noon_state(n: usize) -> Result<PureSectorState> {
    if n == 0 {
        return invalid("NOON state needs N ≥ 1");
    }
    let basis = FockBasis::build(2, n);
    let mut amps = CVec::zeros(basis.len());
    amps[0] = C64::from(1.0);
    amps[basis.len() - 1] = C64::from(1.0);
    PureSectorState::normalized(basis, amps)
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    let err = || Error::InvalidInput(format!("cannot parse complex number {s:?}"));
    if t.is_empty() {
        return Err(err());
    }
    if let Some(body) = t.strip_suffix(['i', 'j']) {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let mut cut = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                cut = Some(k);
                break;
            }
        }
        let (re, im) = match cut {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            x => x.parse::<f64>().map_err(|_| err())?,
        };
        let re = re.parse::<f64>().map_err(|_| err())?;
        return Ok(c(re, im));
    }
    Ok(c(t.parse::<f64>().map_err(|_| err())?, 0.0))
}

pub fn parse_complex_list(s: &str) -> Result<CVec> {
    let v = s.split(',').map(parse_complex).collect::<Result<Vec<_>>>()?;
    Ok(CVec::from_vec(v))
}

/// Named presets: `vacuum [m]`, `fock n0,n1,…`, `css ψ0,ψ1,… N`, `noon N`,
/// `classical α0,α1,… [n_max]`, `file <path.json>`.
pub fn parse_state_preset(spec: &str, limits: &Limits) -> Result<BlockDiagonalState> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    let arg = |k: usize| parts.get(k).copied().ok_or_else(|| Error::InvalidInput(format!("preset {spec:?} is missing an argument")));
    let parse_usize = |x: &str| x.parse::<usize>().map_err(|_| Error::InvalidInput(format!("expected an integer, got {x:?}")));
    let state = match parts.first().copied() {
        Some("vacuum") => {
            let m = match parts.get(1) {
                Some(x) => parse_usize(x)?,
                None => 1,
            };
            if m == 0 {
                return invalid("vacuum needs at least one mode");
            }
            BlockDiagonalState::vacuum(m)
        }
        Some("fock") => {
            let occ = arg(1)?.split(',').map(|x| parse_usize(x.trim())).collect::<Result<Vec<_>>>()?;
            BlockDiagonalState::fock(&occ)?
        }
        Some("css") => {
            let psi = parse_complex_list(arg(1)?)?;
            let n = parse_usize(arg(2)?)?;
            limits.check(psi.len(), n)?;
            coherent_spin_state(&CoherentSpinSpec::normalized(psi, n)?).to_state()
        }
        Some("noon") => noon_state(parse_usize(arg(1)?)?)?.to_state(),
        Some("classical") => {
            let alpha = parse_complex_list(arg(1)?)?;
            let n_max = parts.get(2).map(|x| parse_usize(x)).transpose()?;
            classical_nd_state(&ClassicalSpec::single(alpha), n_max, limits)?.state
        }
        Some("file") => BlockDiagonalState::from_json(&std::fs::read_to_string(arg(1)?)?)?,
        _ => return invalid(format!("unknown state preset {spec:?}")),
    };
    limits.check(state.modes(), state.max_particles())?;
    Ok(state)
}
