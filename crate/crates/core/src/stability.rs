//! Forward stability experiments: paired trajectories driven by one regime
//! path and one noise stream, and the dependence of the time-`n` marginal on
//! the initial condition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ks::{self, KsResult};
use crate::linalg;
use crate::lyapunov;
use crate::model::{self, SwitchingModel};
use crate::moments::least_squares;
use crate::rng;

/// Recording stops once the separation falls below this fraction of the
/// state magnitude; beyond it the difference is roundoff.
pub const COALESCENCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTrace {
    /// `||X_n(x0) - X_n(x0')||`.
    pub distances: Vec<f64>,
    /// `||A_n ... A_1 (x0 - x0')||` propagated without noise.
    pub product_distances: Vec<f64>,
    /// Largest relative gap between the paired difference and the pure product.
    pub max_relative_error: f64,
    /// Least-squares slope of `log distance` against `n`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// Step at which recording stopped because the paths merged numerically.
    pub coalesced_at: Option<usize>,
    pub lambda_ref: Option<f64>,
}

/// Runs `x0` and `x0p` through the same regimes and innovations.
pub fn contraction_experiment(model: &SwitchingModel, x0: &[f64], x0p: &[f64], n: usize, seed: u64) -> Result<ContractionTrace> {
    model.validate()?;
    if x0.len() != model.dim || x0p.len() != model.dim {
        return Err(Error::InvalidArgument("initial states must match the model dimension".into()));
    }
    if x0 == x0p {
        return Err(Error::InvalidArgument("initial states must differ".into()));
    }
    let regimes = model.regime_path(n, seed);
    let noise = model.noise_draws(n, seed);
    let a = model::simulate_along(model, x0, &regimes, &noise);
    let b = model::simulate_along(model, x0p, &regimes, &noise);
    let mut d: Vec<f64> = x0.iter().zip(x0p).map(|(u, v)| u - v).collect();
    let mut tmp = vec![0.0; model.dim];
    let mut distances = vec![linalg::euclid(&d)];
    let mut product_distances = distances.clone();
    let mut max_rel: f64 = 0.0;
    let mut coalesced_at = None;
    for k in 1..=n {
        linalg::mat_vec_into(&model.b[regimes[k]], &d, &mut tmp);
        std::mem::swap(&mut d, &mut tmp);
        let diff: Vec<f64> = a[k].iter().zip(&b[k]).map(|(u, v)| u - v).collect();
        let dn = linalg::euclid(&d);
        let scale = 1.0 + linalg::euclid(&a[k]) + linalg::euclid(&b[k]);
        if scale.is_nan() || scale > model::DIVERGENCE_THRESHOLD || dn < COALESCENCE * scale {
            coalesced_at = Some(k);
            break;
        }
        let gap = linalg::euclid(&diff.iter().zip(&d).map(|(u, v)| u - v).collect::<Vec<_>>());
        max_rel = max_rel.max(gap / dn);
        distances.push(linalg::euclid(&diff));
        product_distances.push(dn);
    }
    let pts: Vec<(f64, f64)> = distances.iter().enumerate().map(|(k, x)| (k as f64, x.ln())).collect();
    let (slope, slope_stderr) = slope_with_stderr(&pts);
    Ok(ContractionTrace {
        distances,
        product_distances,
        max_relative_error: max_rel,
        slope,
        slope_stderr,
        coalesced_at,
        lambda_ref: None,
    })
}

fn slope_with_stderr(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 3 {
        let slope = if pts.len() == 2 { pts[1].1 - pts[0].1 } else { f64::NAN };
        return (slope, f64::NAN);
    }
    let (slope, intercept, _) = least_squares(pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, (ss / (n - 2.0) / sxx).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSummary {
    pub slopes: Vec<f64>,
    pub mean_slope: f64,
    /// Replicate spread over `sqrt(replicates)`.
    pub stderr: f64,
    pub max_relative_error: f64,
}

/// Repeats the contraction experiment over independent seeds.
pub fn contraction_replicates(
    model: &SwitchingModel,
    x0: &[f64],
    x0p: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<ContractionSummary> {
    let traces = rng::map_indexed(replicates, |k| contraction_experiment(model, x0, x0p, n, rng::child_seed(seed, k as u64)));
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = traces.iter().map(|t| t.slope).collect();
    let m = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / m;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(ContractionSummary {
        mean_slope: mean,
        stderr: (var / m).sqrt(),
        max_relative_error: traces.iter().map(|t| t.max_relative_error).fold(0.0, f64::max),
        slopes,
    })
}

/// A starting condition: state and 0-based regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x0: Vec<f64>,
    pub regime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    /// Indices into the list of initial conditions.
    pub first: usize,
    pub second: usize,
    pub coordinate: usize,
    pub ks: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub samples: usize,
    pub alpha: f64,
    pub entries: Vec<KsEntry>,
    /// No entry exceeds its critical value.
    pub all_pass: bool,
}

pub const KS_ALPHA: f64 = 0.01;

/// Gate used before comparing marginals: a short top-exponent estimate must be
/// negative by three standard errors.
fn certify_stationary(model: &SwitchingModel, seed: u64) -> Result<()> {
    let est = lyapunov::estimate_top(model, 10_000, 8, seed)?;
    if est.lambda + 3.0 * est.stderr.max(0.0) < 0.0 {
        Ok(())
    } else {
        Err(Error::NotStationary(format!("top exponent {:.4} +/- {:.4}", est.lambda, est.stderr)))
    }
}

/// Samples `X_n` from every initial condition and compares the marginals
/// coordinatewise with the two-sample KS test.
pub fn distribution_convergence(
    model: &SwitchingModel,
    inits: &[InitialCondition],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    model.validate()?;
    if inits.len() < 2 {
        return Err(Error::InvalidArgument("need at least two initial conditions".into()));
    }
    for c in inits {
        if c.x0.len() != model.dim || c.regime >= model.regimes() {
            return Err(Error::InvalidArgument("initial condition does not match the model".into()));
        }
    }
    if model.exogenous.is_some() {
        return Err(Error::InvalidArgument("exogenous inputs are not supported here".into()));
    }
    certify_stationary(model, rng::child_seed(seed, u64::MAX))?;
    let p = model.dim;
    let finals: Vec<Vec<Vec<f64>>> = inits
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let s = rng::child_seed(seed, k as u64);
            rng::map_indexed(samples, |j| {
                let mut r = rng::stream(s, j as u64);
                let mut regime = c.regime;
                let mut x = c.x0.clone();
                let mut next = vec![0.0; p];
                let mut eps = vec![0.0; p];
                for _ in 0..n {
                    regime = model.chain.step(regime, &mut r);
                    model.noise.fill(&mut r, &mut eps);
                    model.step_into(regime, &x, &eps, 0.0, &mut next);
                    std::mem::swap(&mut x, &mut next);
                }
                // keep the stream position independent of the noise family
                let _: u32 = r.random();
                x
            })
        })
        .collect();
    let mut entries = Vec::new();
    for a in 0..inits.len() {
        for b in a + 1..inits.len() {
            for c in 0..p {
                let xa: Vec<f64> = finals[a].iter().map(|v| v[c]).collect();
                let xb: Vec<f64> = finals[b].iter().map(|v| v[c]).collect();
                entries.push(KsEntry { first: a, second: b, coordinate: c, ks: ks::two_sample(&xa, &xb, KS_ALPHA) });
            }
        }
    }
    let all_pass = entries.iter().all(|e| !e.ks.rejects());
    Ok(ConvergenceReport { n, samples, alpha: KS_ALPHA, entries, all_pass })
}
