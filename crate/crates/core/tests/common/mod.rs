//! Oracles and generators shared by the integration tests. Nothing here calls into the
//! library's numerical routines, so agreement with them is an independent check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pe_core::linalg::{random_density, random_unitary};
use pe_core::BlockDiagonalState;

pub type Mat = DMatrix<C64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: usize, k: usize) -> usize {
    (factorial(n) / (factorial(k) * factorial(n - k))).round() as usize
}

pub fn sector_dim(m: usize, n: usize) -> usize {
    binomial(n + m - 1, m - 1)
}

/// Ryser's formula.
pub fn permanent(a: &Mat) -> C64 {
    let n = a.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for set in 1u32..(1 << n) {
        let mut prod = C64::new(1.0, 0.0);
        for i in 0..n {
            let row: C64 = (0..n).filter(|j| set >> j & 1 == 1).map(|j| a[(i, j)]).sum();
            prod *= row;
        }
        let sign = if (n as u32 - set.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// ⟨out|U|in⟩ for the passive map a_j† ↦ Σ_i u_ij a_i†.
pub fn lifted_amplitude(u: &Mat, out: &[usize], inp: &[usize]) -> C64 {
    let rows: Vec<usize> = out.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
    let cols: Vec<usize> = inp.iter().enumerate().flat_map(|(j, &k)| std::iter::repeat_n(j, k)).collect();
    if rows.len() != cols.len() {
        return C64::new(0.0, 0.0);
    }
    let sub = Mat::from_fn(rows.len(), cols.len(), |a, b| u[(rows[a], cols[b])]);
    let norm: f64 = out.iter().chain(inp).map(|&k| factorial(k)).product();
    permanent(&sub) / norm.sqrt()
}

/// All occupations of m modes with exactly n particles, in no particular order.
pub fn occupations(m: usize, n: usize) -> Vec<Vec<usize>> {
    if m == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|k| {
            occupations(m - 1, n - k).into_iter().map(move |mut rest| {
                rest.insert(0, k);
                rest
            })
        })
        .collect()
}

fn hermitian_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let e = nalgebra::SymmetricEigen::new(m.clone());
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// 2 Σ (λi−λj)²/(λi+λj) |⟨i|H|j⟩|² by a plain double loop.
pub fn qfi_oracle(rho: &Mat, h: &Mat) -> f64 {
    let (lam, v) = hermitian_eigen(rho);
    let hv = v.adjoint() * h * &v;
    let mut f = 0.0;
    for i in 0..lam.len() {
        for j in 0..lam.len() {
            let s = lam[i] + lam[j];
            if s > 1e-12 {
                f += 2.0 * (lam[i] - lam[j]).powi(2) / s * hv[(i, j)].norm_sqr();
            }
        }
    }
    f
}

pub fn variance_oracle(rho: &Mat, h: &Mat) -> f64 {
    let m1 = (rho * h).trace().re;
    let m2 = (rho * h * h).trace().re;
    m2 - m1 * m1
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// F − 4V for NOON with two particles on a Bloch grid, computed on two explicit qubits.
/// Returns the grid maximum; the analytic value is 4 at the poles.
pub fn noon2_bloch_grid_oracle(n_theta: usize, n_phi: usize) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // |2,0⟩ ↔ |00⟩, |0,2⟩ ↔ |11⟩
    let psi = DVector::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)]);
    let rho = &psi * psi.adjoint();
    let one = Mat::identity(2, 2);
    // single-particle reduced state
    let rho1 = Mat::from_fn(2, 2, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..2 {
            acc += rho[(2 * i + k, 2 * j + k)];
        }
        acc
    });
    let mut best = f64::NEG_INFINITY;
    for it in 0..=n_theta {
        let theta = std::f64::consts::PI * it as f64 / n_theta as f64;
        for ip in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * ip as f64 / n_phi as f64;
            let (st, ct) = theta.sin_cos();
            let h = Mat::from_row_slice(
                2,
                2,
                &[
                    C64::new(ct, 0.0),
                    C64::from_polar(st, -phi),
                    C64::from_polar(st, phi),
                    C64::new(-ct, 0.0),
                ],
            );
            let big = (kron(&h, &one) + kron(&one, &h)) * C64::new(s, 0.0);
            let f = 4.0 * variance_oracle(&rho, &big);
            let v = variance_oracle(&rho1, &h);
            best = best.max(f - 4.0 * v);
        }
    }
    best
}

/// Random state with blocks 0..=n_max of random rank and random weights.
pub fn random_state<R: Rng>(rng: &mut R, modes: usize, n_max: usize) -> BlockDiagonalState {
    let mut blocks = Vec::new();
    let mut weights: Vec<f64> = (0..=n_max).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    for (n, w) in weights.into_iter().enumerate() {
        let d = sector_dim(modes, n);
        let rank = rng.gen_range(1..=d);
        blocks.push((n, w, random_density(d, rank, rng)));
    }
    BlockDiagonalState::new(modes, blocks).expect("valid random state")
}

/// Random state confined to one sector.
pub fn random_sector_state<R: Rng>(rng: &mut R, modes: usize, n: usize) -> BlockDiagonalState {
    let d = sector_dim(modes, n);
    let rank = rng.gen_range(1..=d);
    BlockDiagonalState::new(modes, vec![(n, 1.0, random_density(d, rank, rng))]).expect("valid sector state")
}

/// Random m-mode unit vector.
pub fn random_direction<R: Rng>(rng: &mut R, m: usize) -> DVector<C64> {
    random_unitary(m, rng).column(0).into_owned()
}
