//! Draws from the stationary solution
//! `W_n = Mbar_n + E_n + sum_{i>=0} A_n ... A_{n-i} (M_{n-i-1} + E_{n-i-1})`,
//! truncated after `K` products.

use serde::{Deserialize, Serialize};

use super::SwitchingModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Largest tolerated ratio of the last retained term to the partial sum.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    pub draws: Vec<Vec<f64>>,
    /// Norm of the last (oldest) accumulated term, per draw.
    pub last_term_norms: Vec<f64>,
    /// Largest `last term / partial sum` ratio over the draws.
    pub max_truncation_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepCheck {
    /// `|| W_1 - (A_1 W_0 + M_1 + E_1) ||` with both sides truncated at `K`.
    pub residual: f64,
    /// `||A_1|| * ||last term of W_0||`, which the residual cannot exceed.
    pub bound: f64,
    /// First coordinate of `W_0`.
    pub w0: f64,
    /// First coordinate of the one-step extension `A_1 W_0 + M_1 + E_1`.
    pub w1: f64,
}

struct Draw {
    regimes: Vec<usize>,
    noise: Vec<Vec<f64>>,
}

fn draw_inputs(model: &SwitchingModel, rho: &[f64], steps: usize, seed: u64, index: u64) -> Draw {
    let mut r = rng::stream(seed, 2 * index);
    let start = model.chain.draw_from(rho, &mut r);
    let regimes = model.chain.sample_path_from(start, steps - 1, &mut r);
    let mut nr = rng::stream(seed, 2 * index + 1);
    let noise = (0..steps)
        .map(|_| {
            let mut e = vec![0.0; model.dim];
            model.noise.fill(&mut nr, &mut e);
            e
        })
        .collect();
    Draw { regimes, noise }
}

/// Forward accumulation over `regimes[from..to]`: returns the partial sum and
/// the propagated oldest term.
fn accumulate(model: &SwitchingModel, d: &Draw, from: usize, to: usize) -> (Vec<f64>, Vec<f64>) {
    let p = model.dim;
    let zero = vec![0.0; p];
    let mut x = vec![0.0; p];
    model.step_into(d.regimes[from], &zero, &d.noise[from], 0.0, &mut x);
    let mut tail = x.clone();
    let mut next = vec![0.0; p];
    let mut tnext = vec![0.0; p];
    for k in from + 1..to {
        model.step_into(d.regimes[k], &x, &d.noise[k], 0.0, &mut next);
        std::mem::swap(&mut x, &mut next);
        linalg::mat_vec_into(&model.b[d.regimes[k]], &tail, &mut tnext);
        std::mem::swap(&mut tail, &mut tnext);
    }
    (x, tail)
}

fn preconditions(model: &SwitchingModel, k: usize) -> Result<Vec<f64>> {
    model.validate()?;
    if k < 1 {
        return Err(Error::InvalidArgument("truncation length must be at least 1".into()));
    }
    if model.exogenous.is_some() {
        return Err(Error::InvalidArgument("stationary series is not defined for exogenous inputs".into()));
    }
    model.chain.rho()
}

/// `samples` independent draws of `W_0`, each from a regime path started in
/// the stationary law and `K` products deep.
pub fn stationary_solution_sample(model: &SwitchingModel, k: usize, samples: usize, seed: u64) -> Result<StationarySample> {
    let rho = preconditions(model, k)?;
    let results = rng::map_indexed(samples, |s| {
        let d = draw_inputs(model, &rho, k + 1, seed, s as u64);
        let (x, tail) = accumulate(model, &d, 0, k + 1);
        let tn = linalg::euclid(&tail);
        let xn = linalg::euclid(&x);
        let ratio = if tn == 0.0 { 0.0 } else { tn / xn };
        (x, tn, ratio)
    });
    let max_ratio = results.iter().map(|r| r.2).fold(0.0, f64::max);
    if max_ratio.is_nan() || max_ratio > TRUNCATION_TOLERANCE {
        return Err(Error::TruncationNotConverged { ratio: max_ratio });
    }
    let (draws, norms): (Vec<_>, Vec<_>) = results.into_iter().map(|(x, t, _)| (x, t)).unzip();
    Ok(StationarySample { draws, last_term_norms: norms, max_truncation_ratio: max_ratio })
}

/// Extends each truncated `W_0` by one step of the recursion and compares it
/// with the truncated series evaluated directly at time 1.
pub fn stationary_one_step_check(model: &SwitchingModel, k: usize, samples: usize, seed: u64) -> Result<Vec<OneStepCheck>> {
    let rho = preconditions(model, k)?;
    Ok(rng::map_indexed(samples, |s| {
        let d = draw_inputs(model, &rho, k + 2, seed, s as u64);
        let (w0, tail) = accumulate(model, &d, 0, k + 1);
        let (w1_direct, _) = accumulate(model, &d, 1, k + 2);
        let mut extended = vec![0.0; model.dim];
        let last = k + 1;
        model.step_into(d.regimes[last], &w0, &d.noise[last], 0.0, &mut extended);
        let residual = linalg::euclid(&w1_direct.iter().zip(&extended).map(|(a, b)| a - b).collect::<Vec<_>>());
        let bound = linalg::norm(&model.b[d.regimes[last]], linalg::NormKind::Operator2) * linalg::euclid(&tail);
        OneStepCheck { residual, bound, w0: w0[0], w1: extended[0] }
    }))
}
