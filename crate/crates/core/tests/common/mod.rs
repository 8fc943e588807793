//! Independent reference computations for the integration tests. Nothing here
//! calls the estimators under test; plain `Vec` arithmetic only.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use switchvar::linalg::{from_rows, Mat};
use switchvar::{InitLaw, RegimeChain, SwitchingModel};

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mat_mul(a: &Rows, b: &Rows) -> Rows {
    let (n, m, k) = (a.len(), b[0].len(), b.len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

pub fn mat_vec(a: &Rows, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Stationary law by repeated multiplication `pi <- pi P` of the lazy chain
/// `(I + P) / 2`, which converges for every irreducible chain.
pub fn stationary_by_power(p: &Rows) -> Vec<f64> {
    let r = p.len();
    let mut pi = vec![1.0 / r as f64; r];
    for _ in 0..200_000 {
        let next: Vec<f64> = (0..r).map(|j| 0.5 * pi[j] + 0.5 * (0..r).map(|i| pi[i] * p[i][j]).sum::<f64>()).collect();
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter().map(|x| x / s).collect()
}

/// `(M^n 1)_i` for `n = 1..=n_max` with `M_ij = p_ij w_j`.
pub fn transfer_powers(p: &Rows, w: &[f64], n_max: usize) -> Vec<Vec<f64>> {
    let r = p.len();
    let m: Rows = (0..r).map(|i| (0..r).map(|j| p[i][j] * w[j]).collect()).collect();
    let mut v = vec![1.0; r];
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        v = mat_vec(&m, &v);
        out.push(v.clone());
    }
    out
}

/// Spectral radius of a nonnegative matrix by power iteration.
pub fn perron_root(m: &Rows) -> f64 {
    let r = m.len();
    let mut v = vec![1.0; r];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = mat_vec(m, &v);
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            return 0.0;
        }
        lambda = s / v.iter().sum::<f64>();
        v = w.iter().map(|x| x / s).collect();
    }
    lambda
}

/// Exact `P(tau > n)` for two independent copies started in `(i, j)`: the
/// product chain on `r^2` states with the diagonal absorbing.
pub fn product_chain_survival(p: &Rows, i: usize, j: usize, horizon: usize) -> Vec<f64> {
    let r = p.len();
    let mut mass = vec![0.0; r * r];
    mass[i * r + j] = 1.0;
    let alive = |m: &[f64]| (0..r * r).filter(|s| s / r != s % r).map(|s| m[s]).sum::<f64>();
    let mut out = vec![alive(&mass)];
    for _ in 0..horizon {
        let mut next = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                let w = mass[a * r + b];
                if w == 0.0 {
                    continue;
                }
                if a == b {
                    next[a * r + b] += w;
                    continue;
                }
                for c in 0..r {
                    for d in 0..r {
                        next[c * r + d] += w * p[a][c] * p[b][d];
                    }
                }
            }
        }
        mass = next;
        out.push(alive(&mass));
    }
    out
}

/// `sum_i rho_i log|b_i|`.
pub fn scalar_exponent(b: &[f64], rho: &[f64]) -> f64 {
    b.iter().zip(rho).filter(|(_, w)| **w > 0.0).map(|(x, w)| w * x.abs().ln()).sum()
}

/// Row-stochastic matrix with every entry at least `floor / r`.
pub fn random_stochastic(r: usize, floor: f64, g: &mut ChaCha8Rng) -> Rows {
    (0..r)
        .map(|_| {
            let raw: Vec<f64> = (0..r).map(|_| floor / r as f64 + g.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|x| x / s).collect();
            // absorb the rounding error in the last entry
            let head: f64 = row[..r - 1].iter().sum();
            row[r - 1] = 1.0 - head;
            row
        })
        .collect()
}

pub fn random_chain(r: usize, g: &mut ChaCha8Rng) -> RegimeChain {
    RegimeChain::stationary_start(random_stochastic(r, 0.1, g)).expect("positive chain is ergodic")
}

pub fn random_matrix(p: usize, scale: f64, g: &mut ChaCha8Rng) -> Mat {
    let rows: Rows = (0..p).map(|_| (0..p).map(|_| scale * (2.0 * g.random::<f64>() - 1.0)).collect()).collect();
    from_rows(&rows)
}

pub fn random_vector_model(p: usize, r: usize, g: &mut ChaCha8Rng) -> SwitchingModel {
    let chain = random_chain(r, g);
    let b = (0..r).map(|_| random_matrix(p, 0.3 + 1.2 * g.random::<f64>(), g)).collect();
    SwitchingModel::new(chain, b).unwrap()
}

/// Scalar coefficients in `[0.2, 1.6]` with random signs.
pub fn random_scalars(r: usize, g: &mut ChaCha8Rng) -> Vec<f64> {
    (0..r)
        .map(|_| {
            let m = 0.2 + 1.4 * g.random::<f64>();
            if g.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn symmetric_chain(p: f64) -> RegimeChain {
    RegimeChain::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]], InitLaw::Distribution(vec![0.5, 0.5])).unwrap()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Eigenvalue moduli of a real 2x2 matrix from the characteristic polynomial.
pub fn eig_moduli_2x2(m: &Mat) -> [f64; 2] {
    let (t, d) = (m.trace(), m.determinant());
    let disc = t * t - 4.0 * d;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [((t + s) / 2.0).abs(), ((t - s) / 2.0).abs()]
    } else {
        let modulus = d.sqrt();
        [modulus, modulus]
    }
}
