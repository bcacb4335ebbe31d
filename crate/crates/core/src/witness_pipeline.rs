//! Collective-spin shot data: ingestion, moments, the variance-product separability ratio,
//! the linearized lower bound on trace-distance particle entanglement, and synthetic datasets.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock_core::{one_body_operator, BlockDiagonalState, FockBasis};
use crate::linalg::{self, c, CMat};
use crate::measures::Axis;
use crate::optim::NelderMead;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub setting: Axis,
    pub n1a: u64,
    pub n2a: u64,
    pub n1b: u64,
    pub n2b: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessMeta {
    pub eta_a: f64,
    pub eta_b: f64,
    /// Mean atom number in internal state 1 per region.
    pub n1_a_mean: f64,
    pub n1_b_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl WitnessMeta {
    fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return invalid(format!("{name} = {eta} outside (0, 1]"));
            }
        }
        if !(self.n1_a_mean >= 0.0 && self.n1_b_mean >= 0.0) {
            return invalid("mean counts must be nonnegative");
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinShotDataset {
    pub shots: Vec<Shot>,
    pub meta: WitnessMeta,
}

impl SpinShotDataset {
    pub fn new(shots: Vec<Shot>, meta: WitnessMeta) -> Result<Self> {
        meta.validate()?;
        Ok(Self { shots, meta })
    }

    /// CSV with header `setting,n1a,n2a,n1b,n2b`.
    pub fn shots_from_csv<R: Read>(reader: R) -> Result<Vec<Shot>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["setting", "n1a", "n2a", "n1b", "n2b"] {
            return invalid(format!("unexpected CSV header {:?}", headers.iter().collect::<Vec<_>>()));
        }
        rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
    }

    pub fn shots_to_csv<W: Write>(shots: &[Shot], writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in shots {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read(data: &Path, meta: &Path) -> Result<Self> {
        let shots = Self::shots_from_csv(std::fs::File::open(data)?)?;
        Self::new(shots, WitnessMeta::read(meta)?)
    }

    pub fn write(&self, data: &Path, meta: &Path) -> Result<()> {
        Self::shots_to_csv(&self.shots, std::fs::File::create(data)?)?;
        self.meta.write(meta)
    }

    /// Spin pairs (S^A, S^B) = ((N1−N2)/2η) per axis, in a canonical order.
    fn spins(&self) -> [Vec<(f64, f64)>; 3] {
        let mut out: [Vec<(f64, f64)>; 3] = Default::default();
        for s in &self.shots {
            let a = (s.n1a as f64 - s.n2a as f64) / (2.0 * self.meta.eta_a);
            let b = (s.n1b as f64 - s.n2b as f64) / (2.0 * self.meta.eta_b);
            out[axis_index(s.setting)].push((a, b));
        }
        for v in &mut out {
            v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        out
    }
}

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AxisMoments {
    pub shots: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

impl AxisMoments {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len();
        let nf = n as f64;
        let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
        let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
        let (mut va, mut vb, mut cv) = (0.0, 0.0, 0.0);
        for &(a, b) in pairs {
            va += (a - mean_a) * (a - mean_a);
            vb += (b - mean_b) * (b - mean_b);
            cv += (a - mean_a) * (b - mean_b);
        }
        let d = if n > 1 { nf - 1.0 } else { f64::NAN };
        Self { shots: n, mean_a, mean_b, var_a: va / d, var_b: vb / d, cov_ab: cv / d }
    }

    /// Var(g S^A + S^B).
    pub fn combined_variance(&self, g: f64) -> f64 {
        g * g * self.var_a + self.var_b + 2.0 * g * self.cov_ab
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub x: AxisMoments,
    pub y: AxisMoments,
    pub z: AxisMoments,
}

fn moments_from_spins(spins: &[Vec<(f64, f64)>; 3]) -> Result<Moments> {
    let names = ["x", "y", "z"];
    for (i, v) in spins.iter().enumerate() {
        let need = if i == 0 { 1 } else { 2 };
        if v.len() < need {
            return invalid(format!("axis {} has {} shots, need at least {need}", names[i], v.len()));
        }
    }
    Ok(Moments {
        x: AxisMoments::from_pairs(&spins[0]),
        y: AxisMoments::from_pairs(&spins[1]),
        z: AxisMoments::from_pairs(&spins[2]),
    })
}

/// Sample means and unbiased variances per axis. Only means are needed on x.
pub fn estimate_moments(data: &SpinShotDataset) -> Result<Moments> {
    moments_from_spins(&data.spins())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub g_z: f64,
    pub g_y: f64,
}

impl WitnessParams {
    pub fn new(g_z: f64, g_y: f64) -> Result<Self> {
        if !g_z.is_finite() || !g_y.is_finite() {
            return invalid("witness parameters must be finite");
        }
        Ok(Self { g_z, g_y })
    }
}

/// 4 Var(g_z S_z^A + S_z^B) Var(g_y S_y^A + S_y^B) / (|g_z g_y| |⟨S_x^A⟩| + |⟨S_x^B⟩|)²;
/// +∞ when the denominator vanishes.
pub fn separability_ratio(m: &Moments, p: WitnessParams) -> f64 {
    let den = (p.g_z * p.g_y).abs() * m.x.mean_a.abs() + m.x.mean_b.abs();
    if den == 0.0 {
        return f64::INFINITY;
    }
    4.0 * m.z.combined_variance(p.g_z) * m.y.combined_variance(p.g_y) / (den * den)
}

/// Var(S_z^+) + Var(S_y^+) − ⟨S_x^+⟩; negative values witness entanglement.
pub fn witness_expectation(m: &Moments, p: WitnessParams) -> f64 {
    m.z.combined_variance(p.g_z) + m.y.combined_variance(p.g_y) - ((p.g_z * p.g_y).abs() * m.x.mean_a + m.x.mean_b)
}

/// 𝒩 = ¼(|g_z|N_1^A/η_A + N_1^B/η_B)² + ¼(|g_y|N_1^A/η_A + N_1^B/η_B)² + (|g_z g_y|N_1^A/η_A + N_1^B/η_B).
pub fn normalization(p: WitnessParams, meta: &WitnessMeta) -> f64 {
    let a = meta.n1_a_mean / meta.eta_a;
    let b = meta.n1_b_mean / meta.eta_b;
    let sz = p.g_z.abs() * a + b;
    let sy = p.g_y.abs() * a + b;
    0.25 * sz * sz + 0.25 * sy * sy + ((p.g_z * p.g_y).abs() * a + b)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { resamples: 1000, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub bound: f64,
    pub witness_expectation: f64,
    pub normalization: f64,
    pub params: WitnessParams,
    pub ratio: f64,
    /// Standard deviation of the bound over stratified bootstrap resamples at fixed parameters.
    pub standard_error: f64,
    pub resamples: usize,
    /// Shots used on x, y, z.
    pub shots: [usize; 3],
}

fn bound_from(m: &Moments, p: WitnessParams, norm: f64) -> f64 {
    -witness_expectation(m, p) / norm
}

pub fn pe_lower_bound(data: &SpinShotDataset, params: WitnessParams, opts: BootstrapOptions) -> Result<BoundResult> {
    let spins = data.spins();
    let moments = moments_from_spins(&spins)?;
    let norm = normalization(params, &data.meta);
    if !(norm > 0.0) {
        return invalid("normalization vanishes; mean counts must be positive");
    }
    let bound = bound_from(&moments, params, norm);
    let samples: Vec<f64> = (0..opts.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let re: [Vec<(f64, f64)>; 3] = std::array::from_fn(|i| {
                let v = &spins[i];
                (0..v.len()).map(|_| v[rand::Rng::gen_range(&mut rng, 0..v.len())]).collect()
            });
            bound_from(&moments_from_spins(&re).expect("same shot counts"), params, norm)
        })
        .collect();
    let standard_error = if samples.len() > 1 {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (samples.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(BoundResult {
        bound,
        witness_expectation: witness_expectation(&moments, params),
        normalization: norm,
        params,
        ratio: separability_ratio(&moments, params),
        standard_error,
        resamples: opts.resamples,
        shots: [spins[0].len(), spins[1].len(), spins[2].len()],
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OptimizedParams {
    pub params: WitnessParams,
    pub ratio: f64,
    /// False when every grid point had a vanishing denominator.
    pub finite: bool,
}

pub const G_GRID: (f64, f64, usize) = (-5.0, 0.1, 101);

/// Minimizes the separability ratio on a [−5, 5]² grid of step 0.1, then refines locally.
pub fn optimize_witness_params(m: &Moments) -> OptimizedParams {
    let (lo, step, n) = G_GRID;
    let at = |k: usize| lo + step * k as f64;
    let mut best = (f64::INFINITY, at(0), at(0));
    for i in 0..n {
        for j in 0..n {
            let r = separability_ratio(m, WitnessParams { g_z: at(i), g_y: at(j) });
            if r < best.0 {
                best = (r, at(i), at(j));
            }
        }
    }
    if !best.0.is_finite() {
        return OptimizedParams { params: WitnessParams { g_z: best.1, g_y: best.2 }, ratio: best.0, finite: false };
    }
    let nm = NelderMead { step: step / 2.0, tol: 1e-14, max_iter: 4000 };
    let min = nm.minimize(|x| separability_ratio(m, WitnessParams { g_z: x[0], g_y: x[1] }), &[best.1, best.2]);
    if min.value < best.0 && min.x.iter().all(|x| x.is_finite()) {
        best = (min.value, min.x[0], min.x[1]);
    }
    OptimizedParams { params: WitnessParams { g_z: best.1, g_y: best.2 }, ratio: best.0, finite: true }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SynthModel {
    /// Uncorrelated atoms polarized along x.
    Css,
    /// Pair correlations giving total-spin variance ξ²N/4 along z and N/(4ξ²) along y.
    Squeezed { xi2: f64 },
    /// Every shot identical: S_z = S_y = 0 (up to odd-count rounding), S_x = N_K/2.
    Constant,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SynthSpec {
    pub model: SynthModel,
    pub atoms: u64,
    /// Fraction of atoms in region A.
    pub split_fraction: f64,
    pub eta: f64,
    /// Shots per measurement setting.
    pub shots: usize,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.atoms < 2 {
            return invalid("need at least two atoms");
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return invalid("split fraction outside [0, 1]");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid("eta outside (0, 1]");
        }
        if self.shots < 2 {
            return invalid("need at least two shots per setting");
        }
        if let SynthModel::Squeezed { xi2 } = self.model {
            if !(xi2 > 0.0) {
                return invalid("squeezing parameter must be positive");
            }
        }
        Ok(())
    }

    fn regions(&self) -> (u64, u64) {
        let na = (self.split_fraction * self.atoms as f64).round() as u64;
        (na, self.atoms - na)
    }

    /// Pair correlation ⟨σσ⟩/4 of two distinct atoms along z and y.
    fn pair_correlations(&self) -> (f64, f64) {
        let n1 = (self.atoms - 1) as f64;
        match self.model {
            SynthModel::Squeezed { xi2 } => ((xi2 - 1.0) / (4.0 * n1), (1.0 / xi2 - 1.0) / (4.0 * n1)),
            _ => (0.0, 0.0),
        }
    }
}

fn axis_population(na: f64, nb: f64, pair: f64, mean_a: f64, mean_b: f64) -> AxisMoments {
    AxisMoments {
        shots: 0,
        mean_a,
        mean_b,
        var_a: na / 4.0 + na * (na - 1.0) * pair,
        var_b: nb / 4.0 + nb * (nb - 1.0) * pair,
        cov_ab: na * nb * pair,
    }
}

/// Moments of the synthetic model before count rounding.
pub fn population_moments(spec: &SynthSpec) -> Result<Moments> {
    spec.validate()?;
    let (na, nb) = spec.regions();
    let (na, nb) = (na as f64, nb as f64);
    if spec.model == SynthModel::Constant {
        let zero = AxisMoments::default();
        return Ok(Moments { x: AxisMoments { mean_a: na / 2.0, mean_b: nb / 2.0, ..zero }, y: zero, z: zero });
    }
    let (cz, cy) = spec.pair_correlations();
    Ok(Moments {
        x: AxisMoments { mean_a: na / 2.0, mean_b: nb / 2.0, ..AxisMoments::default() },
        y: axis_population(na, nb, cy, 0.0, 0.0),
        z: axis_population(na, nb, cz, 0.0, 0.0),
    })
}

fn counts(spin: f64, region: u64, eta: f64) -> (u64, u64) {
    let n1 = (region as f64 / 2.0 + spin).round().clamp(0.0, region as f64) as u64;
    let n2 = region - n1;
    ((eta * n1 as f64).round() as u64, (eta * n2 as f64).round() as u64)
}

/// Gaussian collective-spin model sampled into integer counts; detection scales counts by η.
pub fn synthesize_dataset(spec: &SynthSpec) -> Result<SpinShotDataset> {
    let pop = population_moments(spec)?;
    let (na, nb) = spec.regions();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut shots = Vec::with_capacity(3 * spec.shots);
    for (axis, m) in [(Axis::X, None), (Axis::Y, Some(pop.y)), (Axis::Z, Some(pop.z))] {
        // Cholesky factor of the 2×2 covariance
        let chol = m.map(|m| {
            let l11 = m.var_a.max(0.0).sqrt();
            let l21 = if l11 > 0.0 { m.cov_ab / l11 } else { 0.0 };
            let l22 = (m.var_b - l21 * l21).max(0.0).sqrt();
            (l11, l21, l22)
        });
        for _ in 0..spec.shots {
            let (sa, sb) = match (spec.model, chol) {
                (SynthModel::Constant, _) | (_, None) => (0.0, 0.0),
                (_, Some((l11, l21, l22))) => {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    let v: f64 = StandardNormal.sample(&mut rng);
                    (l11 * u, l21 * u + l22 * v)
                }
            };
            let ((n1a, n2a), (n1b, n2b)) = if axis == Axis::X {
                (counts(na as f64 / 2.0, na, spec.eta), counts(nb as f64 / 2.0, nb, spec.eta))
            } else {
                (counts(sa, na, spec.eta), counts(sb, nb, spec.eta))
            };
            shots.push(Shot { setting: axis, n1a, n2a, n1b, n2b });
        }
    }
    let x_shots: Vec<&Shot> = shots.iter().filter(|s| s.setting == Axis::X).collect();
    let nx = x_shots.len() as f64;
    let meta = WitnessMeta {
        eta_a: spec.eta,
        eta_b: spec.eta,
        n1_a_mean: x_shots.iter().map(|s| s.n1a as f64).sum::<f64>() / nx,
        n1_b_mean: x_shots.iter().map(|s| s.n1b as f64).sum::<f64>() / nx,
        description: Some(format!("synthetic {:?}, {} atoms, split {}", spec.model, spec.atoms, spec.split_fraction)),
    };
    SpinShotDataset::new(shots, meta)
}

/// Exact moments of a state with regions A = (a1, a2) and B = (b1, b2), each a pair of
/// internal-state modes.
pub fn state_moments(state: &BlockDiagonalState, a: [usize; 2], b: [usize; 2]) -> Result<Moments> {
    let m = state.modes();
    if a.iter().chain(&b).any(|&k| k >= m) {
        return Err(Error::Dimension("region mode index out of range".into()));
    }
    let spin = |pair: [usize; 2], axis: Axis| -> CMat {
        let mut h = CMat::zeros(m, m);
        let (i, j) = (pair[0], pair[1]);
        match axis {
            Axis::Z => {
                h[(i, i)] += c(0.5, 0.0);
                h[(j, j)] += c(-0.5, 0.0);
            }
            Axis::X => {
                h[(i, j)] += c(0.5, 0.0);
                h[(j, i)] += c(0.5, 0.0);
            }
            Axis::Y => {
                h[(i, j)] += c(0.0, -0.5);
                h[(j, i)] += c(0.0, 0.5);
            }
        }
        h
    };
    let expect = |h: &CMat| -> (f64, f64) {
        let mut mean = 0.0;
        let mut sq = 0.0;
        for blk in state.blocks() {
            let op = one_body_operator(h, &FockBasis::build(m, blk.particles));
            let rho_op = &blk.rho * &op;
            mean += blk.weight * linalg::trace(&rho_op).re;
            sq += blk.weight * linalg::trace(&(rho_op * &op)).re;
        }
        (mean, sq)
    };
    let axis = |ax: Axis| -> AxisMoments {
        let (ha, hb) = (spin(a, ax), spin(b, ax));
        let (ma, sa) = expect(&ha);
        let (mb, sb) = expect(&hb);
        let (ms, ss) = expect(&(&ha + &hb));
        let (var_a, var_b) = (sa - ma * ma, sb - mb * mb);
        let var_sum = ss - ms * ms;
        AxisMoments { shots: 0, mean_a: ma, mean_b: mb, var_a, var_b, cov_ab: 0.5 * (var_sum - var_a - var_b) }
    };
    Ok(Moments { x: axis(Axis::X), y: axis(Axis::Y), z: axis(Axis::Z) })
}
