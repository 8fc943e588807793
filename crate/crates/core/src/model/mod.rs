//! Switching models and their simulation.
//!
//! Timing convention: at step `n` the coefficient `A_n`, the noise scale and
//! the mean shift are all those of the regime `I_n` current at time `n`.

mod companion;
mod noise;
mod sma;
mod stationary;

pub use companion::{companion_embed, companion_embed_scalar};
pub use noise::NoiseFamily;
pub use sma::{simulate_sma, SmaModel};
pub use stationary::{stationary_one_step_check, stationary_solution_sample, OneStepCheck, StationarySample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::markov::RegimeChain;
use crate::rng;

/// States with Euclidean norm above this mark the trajectory as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;

/// Stream indices under a simulation seed.
pub(crate) const REGIME_STREAM: u64 = 0;
pub(crate) const NOISE_STREAM: u64 = 1;

/// Exogenous affine term `a_i * u_{n-1}` added to the mean shift of regime `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    /// Per-regime loading vectors, length `dim` each.
    pub coeffs: Vec<Vector>,
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingModel {
    pub chain: RegimeChain,
    pub dim: usize,
    /// Coefficient matrix per regime.
    pub b: Vec<Mat>,
    /// Noise scale per regime.
    pub sigma: Vec<Mat>,
    /// Mean shift per regime.
    pub mu: Vec<Vector>,
    pub noise: NoiseFamily,
    pub exogenous: Option<Exogenous>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `X_0..=X_n`, shorter when the path diverged.
    pub x: Vec<Vec<f64>>,
    /// 0-based regimes `I_0..=I_n`, aligned with `x`.
    pub regimes: Vec<usize>,
    pub seed: u64,
    pub model_hash: String,
    /// First time index whose state exceeded the divergence threshold.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.x.iter().map(|v| v[k]).collect()
    }
}

impl SwitchingModel {
    /// Model with identity noise scale, no mean shift and Gaussian noise.
    pub fn new(chain: RegimeChain, b: Vec<Mat>) -> Result<Self> {
        let dim = b.first().map(|m| m.nrows()).ok_or_else(|| Error::InvalidModel("no coefficient matrices".into()))?;
        let r = b.len();
        let model = Self {
            chain,
            dim,
            b,
            sigma: vec![Mat::identity(dim, dim); r],
            mu: vec![Vector::zeros(dim); r],
            noise: NoiseFamily::Gaussian,
            exogenous: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Scalar model `X_n = b_{I_n} X_{n-1} + eps_n`.
    pub fn scalar(chain: RegimeChain, b: &[f64]) -> Result<Self> {
        Self::new(chain, b.iter().map(|&x| Mat::from_element(1, 1, x)).collect())
    }

    pub fn with_sigma(mut self, sigma: Vec<Mat>) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: Vec<Vector>) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseFamily) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_exogenous(mut self, exogenous: Exogenous) -> Result<Self> {
        self.exogenous = Some(exogenous);
        self.validate()?;
        Ok(self)
    }

    pub fn regimes(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.chain.regimes();
        let p = self.dim;
        if p == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        for (name, len) in [("B", self.b.len()), ("Sigma", self.sigma.len()), ("mu", self.mu.len())] {
            if len != r {
                return Err(Error::InvalidModel(format!("{name} has {len} entries for {r} regimes")));
            }
        }
        for (i, (b, s)) in self.b.iter().zip(&self.sigma).enumerate() {
            if b.shape() != (p, p) || s.shape() != (p, p) {
                return Err(Error::InvalidModel(format!("regime {} matrices must be {p}x{p}", i + 1)));
            }
            if !linalg::is_finite(b) || !linalg::is_finite(s) {
                return Err(Error::InvalidModel(format!("regime {} has non-finite entries", i + 1)));
            }
        }
        for (i, m) in self.mu.iter().enumerate() {
            if m.len() != p || m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("mu for regime {} must be a finite vector of length {p}", i + 1)));
            }
        }
        if let Some(exo) = &self.exogenous {
            if exo.coeffs.len() != r || exo.coeffs.iter().any(|a| a.len() != p) {
                return Err(Error::InvalidModel("exogenous coefficients must be one length-dim vector per regime".into()));
            }
            if exo.series.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel("exogenous series has non-finite values".into()));
            }
        }
        Ok(())
    }

    pub fn has_mean_shift(&self) -> bool {
        self.mu.iter().any(|m| m.iter().any(|&x| x != 0.0))
    }

    /// One step of the recursion: `out = mu_i + a_i u + B_i prev + Sigma_i eps`.
    #[inline]
    pub fn step_into(&self, regime: usize, prev: &[f64], eps: &[f64], exo_input: f64, out: &mut [f64]) {
        let b = &self.b[regime];
        let s = &self.sigma[regime];
        let mu = &self.mu[regime];
        let exo = self.exogenous.as_ref().map(|e| &e.coeffs[regime]);
        for i in 0..self.dim {
            let mut acc = mu[i];
            if let Some(a) = exo {
                acc += a[i] * exo_input;
            }
            for j in 0..self.dim {
                acc += b[(i, j)] * prev[j];
            }
            for j in 0..self.dim {
                acc += s[(i, j)] * eps[j];
            }
            out[i] = acc;
        }
    }

    /// The standardized noise vectors `eps_1..=eps_n` a simulation with `seed`
    /// consumes.
    pub fn noise_draws(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, NOISE_STREAM);
        (0..n)
            .map(|_| {
                let mut e = vec![0.0; self.dim];
                self.noise.fill(&mut rng, &mut e);
                e
            })
            .collect()
    }

    /// Regime path `I_0..=I_n` a simulation with `seed` uses.
    pub fn regime_path(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng::stream(seed, REGIME_STREAM);
        let start = self.chain.draw_initial(&mut rng);
        self.chain.sample_path_from(start, n, &mut rng)
    }

    fn exo_input(&self, k: usize) -> f64 {
        // X_k uses u_{k-1}
        self.exogenous.as_ref().map_or(0.0, |e| e.series[k - 1])
    }

    /// Identifier of the model parameters (FNV-1a over the raw bits).
    pub fn hash(&self) -> String {
        let mut h = Fnv::default();
        h.write_usize(self.dim);
        for row in self.chain.transition() {
            row.iter().for_each(|x| h.write_f64(*x));
        }
        for d in self.chain.init_distribution() {
            h.write_f64(d);
        }
        for m in self.b.iter().chain(&self.sigma) {
            m.iter().for_each(|x| h.write_f64(*x));
        }
        for m in &self.mu {
            m.iter().for_each(|x| h.write_f64(*x));
        }
        h.write_usize(self.noise as usize);
        if let Some(e) = &self.exogenous {
            e.coeffs.iter().flat_map(|a| a.iter()).for_each(|x| h.write_f64(*x));
            e.series.iter().for_each(|x| h.write_f64(*x));
        }
        format!("{:016x}", h.0)
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn write_f64(&mut self, x: f64) {
        self.write(&x.to_bits().to_le_bytes());
    }
    fn write_usize(&mut self, x: usize) {
        self.write(&(x as u64).to_le_bytes());
    }
}

fn check_x0(model: &SwitchingModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.dim {
        return Err(Error::InvalidArgument(format!("x0 has length {}, model dimension is {}", x0.len(), model.dim)));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("x0 must be finite".into()));
    }
    Ok(())
}

/// Simulates `X_0 = x0, X_1..=X_n` along a freshly sampled regime path.
pub fn simulate(model: &SwitchingModel, x0: &[f64], n: usize, seed: u64) -> Result<Trajectory> {
    model.validate()?;
    check_x0(model, x0)?;
    if let Some(e) = &model.exogenous {
        if e.series.len() < n {
            return Err(Error::InvalidArgument(format!(
                "exogenous series has {} values, {n} steps need at least {n}",
                e.series.len()
            )));
        }
    }
    let regimes = model.regime_path(n, seed);
    let mut rng = rng::stream(seed, NOISE_STREAM);
    let mut eps = vec![0.0; model.dim];
    let mut x = Vec::with_capacity(n + 1);
    x.push(x0.to_vec());
    let mut diverged_at = None;
    let mut next = vec![0.0; model.dim];
    for k in 1..=n {
        model.noise.fill(&mut rng, &mut eps);
        model.step_into(regimes[k], &x[k - 1], &eps, model.exo_input(k), &mut next);
        let nrm = linalg::euclid(&next);
        if nrm.is_nan() || nrm > DIVERGENCE_THRESHOLD {
            diverged_at = Some(k);
            break;
        }
        x.push(next.clone());
    }
    let regimes = regimes[..x.len()].to_vec();
    Ok(Trajectory { x, regimes, seed, model_hash: model.hash(), diverged_at })
}

/// Runs the recursion along a given regime path and noise sequence.
/// `noise[k - 1]` is the standardized draw for step `k`. No divergence cut-off.
pub fn simulate_along(model: &SwitchingModel, x0: &[f64], regimes: &[usize], noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = regimes.len() - 1;
    let mut x = Vec::with_capacity(n + 1);
    x.push(x0.to_vec());
    let mut next = vec![0.0; model.dim];
    for k in 1..=n {
        model.step_into(regimes[k], &x[k - 1], &noise[k - 1], model.exo_input(k), &mut next);
        x.push(next.clone());
    }
    x
}
