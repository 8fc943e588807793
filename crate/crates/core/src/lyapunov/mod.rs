//! Lyapunov exponents of the regime-modulated product `A_n ... A_1`.
//!
//! Monte Carlo estimators propagate a vector (top exponent) or an orthonormal
//! frame (full spectrum) through the product, renormalizing after every factor
//! and accumulating the logarithms of the scale factors. Replicates use
//! independent sub-streams; the reported standard error is the replicate
//! spread over `sqrt(replicates)`.

mod closed_form;

pub use closed_form::{
    canonicalize_singular_pair, cb_bound, closed_form_commuting, closed_form_triangular, pincus_singular, PincusCase,
    PincusResult, SingularPairBasis,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, NormKind};
use crate::model::SwitchingModel;
use crate::rng::{self, StreamRng};
use crate::serde_float;

pub const DEFAULT_LENGTH: usize = 100_000;
pub const DEFAULT_REPLICATES: usize = 32;
const MAX_RESTARTS: usize = 64;
/// Column whose norm collapses below this fraction during re-orthonormalization
/// is treated as lost rank.
const RANK_LOSS: f64 = 1e-12;

/// Law of `I_0` for an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartLaw {
    Stationary,
    Regime(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    #[serde(with = "serde_float")]
    pub lambda: f64,
    #[serde(with = "serde_float::opt_vec", default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    #[serde(with = "serde_float::opt_vec", default, skip_serializing_if = "Option::is_none")]
    pub spectrum_stderr: Option<Vec<f64>>,
    #[serde(with = "serde_float")]
    pub stderr: f64,
    pub n: usize,
    pub replicates: usize,
    /// Times a propagated vector was annihilated and replaced.
    pub restarts: usize,
    #[serde(with = "serde_float")]
    pub cb_bound: f64,
    pub norm_name: NormKind,
    pub method: String,
}

fn random_unit(rng: &mut StreamRng, p: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::euclid(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn first_regime(model: &SwitchingModel, start: StartLaw, rho: &[f64], rng: &mut StreamRng) -> usize {
    match start {
        StartLaw::Stationary => model.chain.draw_from(rho, rng),
        StartLaw::Regime(i) => i,
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.contains(&f64::NEG_INFINITY) {
        return (f64::NEG_INFINITY, 0.0);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn check(model: &SwitchingModel, n: usize, replicates: usize) -> Result<Vec<f64>> {
    model.validate()?;
    if n == 0 || replicates == 0 {
        return Err(Error::InvalidArgument("product length and replicates must be positive".into()));
    }
    model.chain.rho()
}

/// One replicate of the top exponent: `(estimate, restarts)`.
fn top_replicate(model: &SwitchingModel, start: StartLaw, rho: &[f64], n: usize, seed: u64, rep: usize) -> (f64, usize) {
    let mut rng = rng::stream(seed, rep as u64);
    let mut regime = first_regime(model, start, rho, &mut rng);
    let p = model.dim;
    let mut v = random_unit(&mut rng, p);
    let mut w = vec![0.0; p];
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut restarts = 0usize;
    for _ in 0..n {
        regime = model.chain.step(regime, &mut rng);
        linalg::mat_vec_into(&model.b[regime], &v, &mut w);
        let s = linalg::euclid(&w);
        if s > 0.0 && s.is_finite() {
            sum += s.ln();
            counted += 1;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / s;
            }
        } else {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return (f64::NEG_INFINITY, restarts);
            }
            // drop the annihilated history and continue from a fresh direction
            sum = 0.0;
            counted = 0;
            v = random_unit(&mut rng, p);
        }
    }
    let est = if counted == 0 { f64::NEG_INFINITY } else { sum / counted as f64 };
    (est, restarts)
}

/// Top exponent with `I_0` drawn from the stationary law.
pub fn estimate_top(model: &SwitchingModel, n: usize, replicates: usize, seed: u64) -> Result<LyapunovEstimate> {
    estimate_top_from(model, StartLaw::Stationary, n, replicates, seed)
}

pub fn estimate_top_from(
    model: &SwitchingModel,
    start: StartLaw,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    let rho = check(model, n, replicates)?;
    if let StartLaw::Regime(i) = start {
        if i >= model.regimes() {
            return Err(Error::InvalidArgument(format!("start regime {} out of range", i + 1)));
        }
    }
    let reps = rng::map_indexed(replicates, |k| top_replicate(model, start, &rho, n, seed, k));
    let values: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let restarts = reps.iter().map(|r| r.1).sum();
    let (lambda, stderr) = mean_stderr(&values);
    Ok(LyapunovEstimate {
        lambda,
        spectrum: None,
        spectrum_stderr: None,
        stderr,
        n,
        replicates,
        restarts,
        cb_bound: cb_bound(model, &rho, NormKind::Operator2),
        norm_name: NormKind::Operator2,
        method: "mc".into(),
    })
}

/// Modified Gram-Schmidt with one re-orthogonalization pass on the columns of
/// `frame` (column-major, `p` columns of length `p`). Returns `log r_jj`, with
/// `-inf` for columns lost to rank deficiency. Columns `>= live` are ignored.
fn reorthonormalize(frame: &mut [Vec<f64>], live: &mut usize, logs: &mut [f64]) {
    let p = frame.len();
    for j in 0..*live {
        let before = linalg::euclid(&frame[j]);
        for _ in 0..2 {
            for l in 0..j {
                let (head, tail) = frame.split_at_mut(j);
                let q = &head[l];
                let z = &mut tail[0];
                let r: f64 = q.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
                z.iter_mut().zip(q).for_each(|(zi, qi)| *zi -= r * qi);
            }
        }
        let after = linalg::euclid(&frame[j]);
        if !after.is_finite() || after <= RANK_LOSS * before || after == 0.0 {
            for x in logs.iter_mut().take(p).skip(j) {
                *x = f64::NEG_INFINITY;
            }
            *live = j;
            return;
        }
        logs[j] = after.ln();
        frame[j].iter_mut().for_each(|x| *x /= after);
    }
}

fn spectrum_replicate(model: &SwitchingModel, rho: &[f64], n: usize, seed: u64, rep: usize) -> Vec<f64> {
    let p = model.dim;
    let mut rng = rng::stream(seed, rep as u64);
    let mut regime = first_regime(model, StartLaw::Stationary, rho, &mut rng);
    let mut frame: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut live = p;
    let mut logs = vec![0.0; p];
    reorthonormalize(&mut frame, &mut live, &mut logs);
    let mut sums = vec![0.0; p];
    let mut tmp = vec![0.0; p];
    for _ in 0..n {
        regime = model.chain.step(regime, &mut rng);
        for col in frame.iter_mut().take(live) {
            linalg::mat_vec_into(&model.b[regime], col, &mut tmp);
            col.copy_from_slice(&tmp);
        }
        reorthonormalize(&mut frame, &mut live, &mut logs);
        for j in 0..p {
            sums[j] = if j < live { sums[j] + logs[j] } else { f64::NEG_INFINITY };
        }
        if live == 0 {
            break;
        }
    }
    sums.into_iter().map(|s| s / n as f64).collect()
}

/// Full spectrum by QR re-orthonormalization of a propagated frame.
pub fn estimate_spectrum(model: &SwitchingModel, n: usize, replicates: usize, seed: u64) -> Result<LyapunovEstimate> {
    let rho = check(model, n, replicates)?;
    let p = model.dim;
    let reps = rng::map_indexed(replicates, |k| spectrum_replicate(model, &rho, n, seed, k));
    let mut pairs: Vec<(f64, f64)> = (0..p)
        .map(|j| mean_stderr(&reps.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let spectrum: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let stderrs: Vec<f64> = pairs.iter().map(|x| x.1).collect();
    Ok(LyapunovEstimate {
        lambda: spectrum[0],
        stderr: stderrs[0],
        spectrum: Some(spectrum),
        spectrum_stderr: Some(stderrs),
        n,
        replicates,
        restarts: 0,
        cb_bound: cb_bound(model, &rho, NormKind::Operator2),
        norm_name: NormKind::Operator2,
        method: "mc-qr".into(),
    })
}

/// Top exponent from each fixed starting regime next to the stationary-start
/// estimate. Descriptive only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSensitivity {
    #[serde(with = "serde_float")]
    pub stationary: f64,
    #[serde(with = "serde_float::vec")]
    pub per_regime: Vec<f64>,
    #[serde(with = "serde_float")]
    pub max_abs_difference: f64,
}

pub fn start_sensitivity(model: &SwitchingModel, n: usize, replicates: usize, seed: u64) -> Result<StartSensitivity> {
    let stationary = estimate_top(model, n, replicates, seed)?.lambda;
    let per_regime = (0..model.regimes())
        .map(|i| estimate_top_from(model, StartLaw::Regime(i), n, replicates, seed).map(|e| e.lambda))
        .collect::<Result<Vec<_>>>()?;
    let max_abs_difference = per_regime
        .iter()
        .map(|x| if *x == stationary { 0.0 } else { (x - stationary).abs() })
        .fold(0.0, f64::max);
    Ok(StartSensitivity { stationary, per_regime, max_abs_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_rows, Mat};
    use crate::markov::{InitLaw, RegimeChain};

    fn sym_chain(p: f64) -> RegimeChain {
        RegimeChain::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]], InitLaw::State(0)).unwrap()
    }

    #[test]
    fn scaled_identity_is_exact() {
        let m = SwitchingModel::new(RegimeChain::trivial(), vec![Mat::identity(3, 3) * 1.7]).unwrap();
        let e = estimate_top(&m, 1000, 4, 0).unwrap();
        assert!((e.lambda - 1.7f64.ln()).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn scalar_matches_log_mean() {
        let m = SwitchingModel::scalar(sym_chain(0.3), &[0.5, 1.5]).unwrap();
        let e = estimate_top(&m, 20_000, 16, 1).unwrap();
        let exact = 0.5 * 0.5f64.ln() + 0.5 * 1.5f64.ln();
        assert!((e.lambda - exact).abs() < 4.0 * e.stderr.max(1e-3), "{} vs {exact}", e.lambda);
    }

    #[test]
    fn constant_diagonal_spectrum() {
        let m = SwitchingModel::new(RegimeChain::trivial(), vec![from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]])]).unwrap();
        let e = estimate_spectrum(&m, 2000, 2, 0).unwrap();
        let s = e.spectrum.unwrap();
        assert!((s[0] - 2f64.ln()).abs() < 1e-3);
        assert!((s[1] + 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn zero_matrix_gives_minus_infinity() {
        let m = SwitchingModel::new(RegimeChain::trivial(), vec![Mat::zeros(2, 2)]).unwrap();
        let e = estimate_top(&m, 200, 3, 0).unwrap();
        assert_eq!(e.lambda, f64::NEG_INFINITY);
        assert!(e.restarts > 0);
        let s = estimate_spectrum(&m, 200, 2, 0).unwrap();
        assert!(s.spectrum.unwrap().iter().all(|x| *x == f64::NEG_INFINITY));
    }

    #[test]
    fn rank_one_product_loses_lower_exponents() {
        let b1 = from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]);
        let b2 = from_rows(&[vec![100.0, -1000.0], vec![9.99, -99.9]]);
        let m = SwitchingModel::new(sym_chain(0.8), vec![b1, b2]).unwrap();
        let s = estimate_spectrum(&m, 10_000, 4, 0).unwrap();
        let spec = s.spectrum.unwrap();
        assert!(spec[0].is_finite());
        assert_eq!(spec[1], f64::NEG_INFINITY);
    }

    #[test]
    fn nilpotent_factor_triggers_restarts_only_when_hit() {
        // B2 maps everything to e1 and B1 kills e1: products vanish after "2 then 1"
        let b1 = from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let b2 = from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        let m = SwitchingModel::new(sym_chain(0.5), vec![b1, b2]).unwrap();
        let e = estimate_top(&m, 500, 4, 0).unwrap();
        assert_eq!(e.lambda, f64::NEG_INFINITY);
    }

    #[test]
    fn spectrum_and_top_agree() {
        let b1 = from_rows(&[vec![0.9, 0.4], vec![-0.3, 0.2]]);
        let b2 = from_rows(&[vec![0.1, 1.2], vec![0.5, 0.6]]);
        let m = SwitchingModel::new(sym_chain(0.4), vec![b1, b2]).unwrap();
        let t = estimate_top(&m, 20_000, 16, 3).unwrap();
        let s = estimate_spectrum(&m, 20_000, 16, 4).unwrap();
        let se = (t.stderr.powi(2) + s.stderr.powi(2)).sqrt();
        assert!((t.lambda - s.lambda).abs() < 3.0 * se, "{} vs {} (se {se})", t.lambda, s.lambda);
    }

    #[test]
    fn estimates_are_deterministic() {
        let m = SwitchingModel::scalar(sym_chain(0.2), &[0.3, 1.3]).unwrap();
        assert_eq!(estimate_top(&m, 1000, 4, 9).unwrap(), estimate_top(&m, 1000, 4, 9).unwrap());
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let c = RegimeChain::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], InitLaw::State(0)).unwrap();
        let m = SwitchingModel::scalar(c, &[0.5, 0.5]).unwrap();
        assert!(matches!(estimate_top(&m, 100, 2, 0), Err(Error::NotErgodic(_))));
    }

    #[test]
    fn arbitrary_start_matches_stationary_for_mixing_chain() {
        let m = SwitchingModel::scalar(sym_chain(0.3), &[0.5, 1.5]).unwrap();
        let s = start_sensitivity(&m, 20_000, 8, 2).unwrap();
        assert_eq!(s.per_regime.len(), 2);
        assert!(s.max_abs_difference < 0.02);
    }
}
