use super::{NoiseFamily, Trajectory, NOISE_STREAM, REGIME_STREAM};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::markov::RegimeChain;
use crate::rng;

/// Switching moving average of order `q`:
/// `X_n = E_n + sum_j C_j(I_n) E_{n-j}`.
///
/// Lagged innovations are scaled by the noise scale of the *current* regime,
/// `E_{n-j} = Sigma_{I_n} eps_{n-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmaModel {
    pub chain: RegimeChain,
    pub dim: usize,
    /// `c[j][i]` is the lag `j + 1` matrix of regime `i`.
    pub c: Vec<Vec<Mat>>,
    pub sigma: Vec<Mat>,
    pub noise: NoiseFamily,
}

impl SmaModel {
    pub fn new(chain: RegimeChain, c: Vec<Vec<Mat>>, sigma: Vec<Mat>, noise: NoiseFamily) -> Result<Self> {
        let dim = sigma.first().map(|s| s.nrows()).unwrap_or(0);
        let m = Self { chain, dim, c, sigma, noise };
        m.validate()?;
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.chain.regimes();
        let p = self.dim;
        if self.c.is_empty() {
            return Err(Error::InvalidModel("moving average order must be at least 1".into()));
        }
        if p == 0 || self.sigma.len() != r || self.sigma.iter().any(|s| s.shape() != (p, p) || !linalg::is_finite(s)) {
            return Err(Error::InvalidModel(format!("need {r} finite {p}x{p} noise scales")));
        }
        for (j, lag) in self.c.iter().enumerate() {
            if lag.len() != r || lag.iter().any(|m| m.shape() != (p, p) || !linalg::is_finite(m)) {
                return Err(Error::InvalidModel(format!("lag {} needs {r} finite {p}x{p} matrices", j + 1)));
            }
        }
        Ok(())
    }
}

/// Emits `X_0..=X_n`; `q` innovations are drawn as warm-up before `X_0`.
pub fn simulate_sma(model: &SmaModel, n: usize, seed: u64) -> Result<Trajectory> {
    model.validate()?;
    let p = model.dim;
    let q = model.order();
    let mut rrng = rng::stream(seed, REGIME_STREAM);
    let start = model.chain.draw_initial(&mut rrng);
    let regimes = model.chain.sample_path_from(start, n, &mut rrng);
    let mut nrng = rng::stream(seed, NOISE_STREAM);
    // history[0] is the newest innovation
    let mut history: std::collections::VecDeque<Vec<f64>> = (0..q)
        .map(|_| {
            let mut e = vec![0.0; p];
            model.noise.fill(&mut nrng, &mut e);
            e
        })
        .collect();
    let mut x = Vec::with_capacity(n + 1);
    let mut scaled = vec![0.0; p];
    let mut eps = vec![0.0; p];
    for &i in &regimes {
        model.noise.fill(&mut nrng, &mut eps);
        history.push_front(eps.clone());
        history.truncate(q + 1);
        let s = &model.sigma[i];
        let mut out = vec![0.0; p];
        linalg::mat_vec_into(s, &history[0], &mut out);
        for (j, past) in history.iter().enumerate().take(q + 1).skip(1) {
            linalg::mat_vec_into(s, past, &mut scaled);
            let cj = &model.c[j - 1][i];
            for (a, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (b, sv) in scaled.iter().enumerate() {
                    acc += cj[(a, b)] * sv;
                }
                *o += acc;
            }
        }
        x.push(out);
    }
    Ok(Trajectory { x, regimes, seed, model_hash: String::from("sma"), diverged_at: None })
}
