//! Second-order diagnostics: `Phi_n(i) = E[ ||A_n ... A_1|| | I_0 = i ]`, its
//! geometric decay rate, and the autocovariance bound it implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, NormKind};
use crate::model::{self, SwitchingModel};
use crate::rng;
use crate::serde_float;
use crate::csv::fmt17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    /// `values[n - 1][i]` estimates `Phi_n(i)` for `n = 1..=n_max`.
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// `log` of `values`, kept separately so overflowing growth stays usable.
    #[serde(skip)]
    pub log_values: Vec<Vec<f64>>,
    /// Unconditional `Phi_n = sum_i rho_i Phi_n(i)`.
    pub unconditional: Vec<f64>,
    pub unconditional_stderr: Vec<f64>,
    #[serde(skip)]
    pub log_unconditional: Vec<f64>,
    pub rho: Vec<f64>,
    pub norm_name: NormKind,
    /// Sample paths per `(n, i)`.
    pub trials: usize,
}

impl PhiEstimate {
    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    /// `Phi_m` with `Phi_0 = 1`.
    pub fn unconditional_at(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            self.unconditional[m - 1]
        }
    }

    /// `max_i Phi_m(i)` with `Phi_0 = 1`.
    pub fn max_conditional_at(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            self.values[m - 1].iter().copied().fold(0.0, f64::max)
        }
    }

    /// CSV table: `n, phi_1, se_1, ..., phi_r, se_r, phi, se`.
    pub fn to_csv(&self) -> String {
        let r = self.rho.len();
        let mut out = String::from("n");
        for i in 1..=r {
            out.push_str(&format!(",phi_{i},se_{i}"));
        }
        out.push_str(",phi,se\n");
        for n in 0..self.n_max() {
            out.push_str(&(n + 1).to_string());
            for i in 0..r {
                out.push_str(&format!(",{},{}", fmt17(self.values[n][i]), fmt17(self.stderr[n][i])));
            }
            out.push_str(&format!(",{},{}\n", fmt17(self.unconditional[n]), fmt17(self.unconditional_stderr[n])));
        }
        out
    }
}

/// Per-trial `log ||A_n ... A_1||` for `n = 1..=n_max`, from a fixed start.
fn log_norm_path(model: &SwitchingModel, start: usize, n_max: usize, norm: NormKind, rng: &mut rng::StreamRng) -> Vec<f64> {
    let p = model.dim;
    let mut prod = Mat::identity(p, p);
    let mut next = Mat::zeros(p, p);
    let mut log_scale = 0.0;
    let mut regime = start;
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        regime = model.chain.step(regime, rng);
        if log_scale == f64::NEG_INFINITY {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        linalg::mat_mul_into(&model.b[regime], &prod, &mut next);
        std::mem::swap(&mut prod, &mut next);
        let s = linalg::max_abs(&prod);
        if s == 0.0 {
            log_scale = f64::NEG_INFINITY;
            out.push(f64::NEG_INFINITY);
            continue;
        }
        prod /= s;
        log_scale += s.ln();
        out.push(linalg::norm(&prod, norm).ln() + log_scale);
    }
    out
}

/// Mean and standard error of `exp(logs)`, returned as
/// `(log mean, mean, stderr)` and computed relative to the largest value.
fn log_mean(logs: &[f64]) -> (f64, f64, f64) {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0, 0.0);
    }
    let t = logs.len() as f64;
    let scaled: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / t;
    let var = if logs.len() > 1 {
        scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    let log_mean = m + mean.ln();
    (log_mean, log_mean.exp(), (var / t).sqrt() * m.exp())
}

/// Monte Carlo `Phi_n(i)` for every start regime and `n <= n_max`.
pub fn estimate_phi(model: &SwitchingModel, n_max: usize, trials: usize, seed: u64, norm: NormKind) -> Result<PhiEstimate> {
    model.validate()?;
    if n_max == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n_max and trials must be positive".into()));
    }
    let rho = model.chain.rho()?;
    let r = model.regimes();
    let per_regime: Vec<Vec<Vec<f64>>> = (0..r)
        .map(|i| {
            let s = rng::child_seed(seed, i as u64);
            rng::map_indexed(trials, |t| log_norm_path(model, i, n_max, norm, &mut rng::stream(s, t as u64)))
        })
        .collect();
    let mut values = vec![vec![0.0; r]; n_max];
    let mut stderr = vec![vec![0.0; r]; n_max];
    let mut log_values = vec![vec![0.0; r]; n_max];
    let mut unconditional = vec![0.0; n_max];
    let mut unconditional_stderr = vec![0.0; n_max];
    let mut log_unconditional = vec![0.0; n_max];
    let mut column = vec![0.0; trials];
    for n in 0..n_max {
        let mut terms = Vec::with_capacity(r);
        for i in 0..r {
            for (t, c) in column.iter_mut().enumerate() {
                *c = per_regime[i][t][n];
            }
            let (lm, m, se) = log_mean(&column);
            values[n][i] = m;
            stderr[n][i] = se;
            log_values[n][i] = lm;
            terms.push(lm);
        }
        let weighted: Vec<f64> = terms
            .iter()
            .zip(&rho)
            .map(|(l, w)| if *w > 0.0 { l + w.ln() } else { f64::NEG_INFINITY })
            .collect();
        let top = weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_unconditional[n] = if top == f64::NEG_INFINITY {
            top
        } else {
            top + weighted.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
        };
        unconditional[n] = log_unconditional[n].exp();
        unconditional_stderr[n] = (0..r).map(|i| (rho[i] * stderr[n][i]).powi(2)).sum::<f64>().sqrt();
    }
    Ok(PhiEstimate {
        values,
        stderr,
        log_values,
        unconditional,
        unconditional_stderr,
        log_unconditional,
        rho,
        norm_name: norm,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted geometric rate, `exp(slope)` of `log Phi_n` on the tail.
    pub gamma: f64,
    pub r_squared: f64,
    pub condition_a: bool,
    /// Fitted prefactor, `Phi_n ~ c gamma^n`.
    #[serde(with = "serde_float")]
    pub c: f64,
    pub all_zero_tail: bool,
    pub window_start: usize,
    pub window_end: usize,
}

pub const R_SQUARED_GATE: f64 = 0.9;

/// Least-squares fit of `log Phi_n` (unconditional) against `n` over the last
/// `window` fraction of the range.
pub fn fit_decay(phi: &PhiEstimate, window: f64) -> Result<DecayFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidArgument("window must be a fraction in (0, 1]".into()));
    }
    let n_max = phi.n_max();
    let len = ((n_max as f64 * window).round() as usize).clamp(1, n_max);
    let start = n_max - len + 1;
    let tail: Vec<(f64, f64)> = (start..=n_max).map(|n| (n as f64, phi.log_unconditional[n - 1])).collect();
    if tail.iter().all(|(_, y)| *y == f64::NEG_INFINITY) {
        return Ok(DecayFit {
            gamma: 0.0,
            r_squared: 1.0,
            condition_a: true,
            c: 0.0,
            all_zero_tail: true,
            window_start: start,
            window_end: n_max,
        });
    }
    let pts: Vec<(f64, f64)> = tail.into_iter().filter(|(_, y)| y.is_finite()).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientTail);
    }
    let (slope, intercept, r_squared) = least_squares(&pts);
    let gamma = slope.exp();
    Ok(DecayFit {
        gamma,
        r_squared,
        condition_a: gamma < 1.0 && r_squared >= R_SQUARED_GATE,
        c: intercept.exp(),
        all_zero_tail: false,
        window_start: start,
        window_end: n_max,
    })
}

/// `(slope, intercept, r^2)`; `r^2 = 1` for an exact fit of a flat series.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy <= 1e-24 * n {
        1.0
    } else {
        (1.0 - ss_res / syy).max(0.0)
    };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderVerdict {
    pub second_order: bool,
    pub gamma: f64,
    #[serde(with = "serde_float")]
    pub log_gamma: f64,
    #[serde(with = "serde_float::opt", default)]
    pub lambda: Option<f64>,
    /// `lambda <= log gamma + tolerance`, when both are available and (A) holds.
    pub jensen_consistent: Option<bool>,
    pub note: String,
}

pub const JENSEN_TOLERANCE: f64 = 0.05;

/// Condition (A) verdict, cross-checked against a top exponent estimate
/// (`lambda < log gamma`).
pub fn check_second_order(lambda: Option<f64>, fit: &DecayFit) -> SecondOrderVerdict {
    let log_gamma = fit.gamma.ln();
    let jensen_consistent = match lambda {
        Some(l) if fit.condition_a => Some(l <= log_gamma + JENSEN_TOLERANCE),
        _ => None,
    };
    let note = match (lambda, jensen_consistent) {
        (Some(l), Some(true)) => format!("lambda {l:.4} <= log gamma {log_gamma:.4}"),
        (Some(l), Some(false)) => format!("lambda {l:.4} exceeds log gamma {log_gamma:.4}; estimates are inconsistent"),
        (Some(l), None) => format!("condition (A) fails (gamma {:.4}); lambda {l:.4}", fit.gamma),
        (None, _) => format!("gamma {:.4}, no exponent estimate", fit.gamma),
    };
    SecondOrderVerdict { second_order: fit.condition_a, gamma: fit.gamma, log_gamma, lambda, jensen_consistent, note }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovRow {
    pub lag: usize,
    /// Sample `E[X_t' X_{t+m}]`.
    pub autocov: f64,
    /// Batch-means standard error of `autocov`.
    pub stderr: f64,
    pub autocorrelation: f64,
    /// `Phi_m * E||X||^2`.
    pub bound: f64,
    /// `max_i Phi_m(i) * E||X||^2`.
    pub conditional_bound: f64,
    /// `|autocov| <= bound + 4 stderr`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovTable {
    pub rows: Vec<AutocovRow>,
    pub second_moment: f64,
    pub length: usize,
    pub all_hold: bool,
}

const BATCHES: usize = 50;

/// Sample autocovariances of one long path against `Phi_m E||X||^2`.
pub fn autocovariance_check(
    model: &SwitchingModel,
    phi: &PhiEstimate,
    fit: &DecayFit,
    burn_in: usize,
    length: usize,
    max_lag: usize,
    seed: u64,
) -> Result<AutocovTable> {
    if !fit.condition_a {
        return Err(Error::NotSecondOrder);
    }
    if model.has_mean_shift() || model.exogenous.is_some() {
        return Err(Error::InvalidArgument("the autocovariance bound applies to models without mean shifts".into()));
    }
    if max_lag > phi.n_max() {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} exceeds Phi range {}", phi.n_max())));
    }
    if length < BATCHES * (max_lag + 1) {
        return Err(Error::InvalidArgument("path too short for the requested lags".into()));
    }
    let traj = model::simulate(model, &vec![0.0; model.dim], burn_in + length, seed)?;
    if traj.diverged_at.is_some() {
        return Err(Error::NotSecondOrder);
    }
    let xs = &traj.x[burn_in + 1..];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let batch = length / BATCHES;
    let mut rows = Vec::with_capacity(max_lag + 1);
    let mut second_moment = 0.0;
    for m in 0..=max_lag {
        let count = length - m;
        let total: f64 = (0..count).map(|t| dot(&xs[t], &xs[t + m])).sum();
        let mean = total / count as f64;
        let batch_means: Vec<f64> = (0..BATCHES)
            .map(|b| {
                let lo = b * batch;
                let hi = ((b + 1) * batch).min(count);
                (lo..hi).map(|t| dot(&xs[t], &xs[t + m])).sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        let bm = batch_means.iter().sum::<f64>() / BATCHES as f64;
        let se = (batch_means.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (BATCHES as f64 - 1.0) / BATCHES as f64).sqrt();
        if m == 0 {
            second_moment = mean;
        }
        let bound = phi.unconditional_at(m) * second_moment;
        rows.push(AutocovRow {
            lag: m,
            autocov: mean,
            stderr: se,
            autocorrelation: if second_moment > 0.0 { mean / second_moment } else { 0.0 },
            bound,
            conditional_bound: phi.max_conditional_at(m) * second_moment,
            holds: mean.abs() <= bound + 4.0 * se,
        });
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(AutocovTable { rows, second_moment, length, all_hold })
}
