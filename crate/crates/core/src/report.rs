//! Full diagnosis of a switching model: chain checks, Lyapunov exponent with
//! closed forms where the structure allows, norm bounds, second-order decay
//! and a stationarity verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, NormKind};
use crate::lyapunov::{self, LyapunovEstimate, StartSensitivity};
use crate::markov::{ChainDiagnostics, InitLaw, RegimeChain};
use crate::model::SwitchingModel;
use crate::moments::{self, DecayFit, SecondOrderVerdict};
use crate::rng;
use crate::serde_float;

/// Margin in standard errors a Monte Carlo exponent needs to carry a verdict.
pub const VERDICT_SIGMAS: f64 = 3.0;
/// Closed-form exponents this close to zero are treated as the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;
const SINGULAR_PAIR_TERMS: usize = 2000;
const NOISE_MOMENT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StationaryStable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::StationaryStable => "stationary-stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// `triangular`, `commuting` or `singular-pair`.
    pub method: String,
    /// Exponents in decreasing order; `singular-pair` gives the top one only.
    #[serde(with = "serde_float::vec")]
    pub spectrum: Vec<f64>,
}

impl ClosedForm {
    pub fn top(&self) -> f64 {
        self.spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub norm: NormKind,
    #[serde(with = "serde_float")]
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub phi_n_max: usize,
    pub phi_trials: usize,
    pub window: f64,
    pub start_sensitivity: bool,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            n: lyapunov::DEFAULT_LENGTH,
            replicates: lyapunov::DEFAULT_REPLICATES,
            seed: 0,
            phi_n_max: 100,
            phi_trials: 2000,
            window: 0.5,
            start_sensitivity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub model_hash: String,
    pub chain: ChainDiagnostics,
    pub lyapunov: LyapunovEstimate,
    pub cb_bounds: Vec<NormBound>,
    pub closed_form: Option<ClosedForm>,
    pub phi: Option<DecayFit>,
    pub second_order: Option<SecondOrderVerdict>,
    pub verdict: Verdict,
    /// Sample mean of `max(log |E_1|, 0)` under the stationary regime law.
    #[serde(with = "serde_float")]
    pub noise_log_moment: f64,
    pub start_sensitivity: Option<StartSensitivity>,
    pub settings: DiagnoseOptions,
    pub warnings: Vec<String>,
}

/// Verdict from the exponent and the noise moment. A closed form decides on
/// its own; otherwise the Monte Carlo estimate must clear zero by
/// [`VERDICT_SIGMAS`] standard errors.
pub fn decide(estimate: &LyapunovEstimate, closed: Option<&ClosedForm>, noise_log_moment: f64) -> Verdict {
    let (stable, unstable) = match closed {
        Some(c) => {
            let top = c.top();
            (top < -BOUNDARY_TOL, top > BOUNDARY_TOL)
        }
        None => {
            let margin = VERDICT_SIGMAS * estimate.stderr;
            (estimate.lambda + margin < 0.0, estimate.lambda - margin > 0.0)
        }
    };
    if stable && noise_log_moment.is_finite() {
        Verdict::StationaryStable
    } else if unstable {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

fn swapped_chain(chain: &RegimeChain) -> Result<RegimeChain> {
    let p = chain.transition();
    let t = vec![vec![p[1][1], p[1][0]], vec![p[0][1], p[0][0]]];
    let init = chain.init_distribution();
    RegimeChain::new(t, InitLaw::Distribution(vec![init[1], init[0]]))
}

fn singular_pair(b1: &Mat, b2: &Mat, chain: &RegimeChain) -> Result<f64> {
    let basis = lyapunov::canonicalize_singular_pair(b1, b2)?;
    let rho = chain.rho()?;
    Ok(lyapunov::pincus_singular(&basis.b1, &basis.b2, chain, rho[0], SINGULAR_PAIR_TERMS)?.lambda)
}

/// Closed-form exponents when the coefficient structure allows one: triangular,
/// then commuting, then a two-regime 2x2 pair with a singular member.
pub fn closed_form(model: &SwitchingModel, rho: &[f64], warnings: &mut Vec<String>) -> Option<ClosedForm> {
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    if let Ok(s) = lyapunov::closed_form_triangular(model, rho) {
        return Some(ClosedForm { method: "triangular".into(), spectrum: sorted(s) });
    }
    match lyapunov::closed_form_commuting(model, rho) {
        Ok(s) => return Some(ClosedForm { method: "commuting".into(), spectrum: sorted(s) }),
        Err(Error::NotSimultaneouslyDiagonalizable) => {
            warnings.push("coefficients commute but are not simultaneously diagonalizable; no closed form".into())
        }
        Err(_) => {}
    }
    if model.regimes() == 2 && model.dim == 2 {
        let (b1, b2) = (&model.b[0], &model.b[1]);
        let direct = singular_pair(b1, b2, &model.chain);
        let result = match direct {
            Ok(l) => Ok(l),
            Err(_) => swapped_chain(&model.chain).and_then(|c| singular_pair(b2, b1, &c)),
        };
        match result {
            Ok(l) => return Some(ClosedForm { method: "singular-pair".into(), spectrum: vec![l] }),
            Err(Error::ZeroTrace) => return Some(ClosedForm { method: "singular-pair".into(), spectrum: vec![f64::NEG_INFINITY] }),
            Err(Error::TruncationNotConverged { ratio }) => {
                warnings.push(format!("singular-pair series did not converge (ratio {ratio:e}); no closed form"))
            }
            Err(_) => {}
        }
    }
    None
}

/// `E max(log |E_1|, 0)` with the regime drawn from `rho`.
pub fn noise_log_moment(model: &SwitchingModel, rho: &[f64], draws: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, 0);
    let p = model.dim;
    let mut eps = vec![0.0; p];
    let mut e = vec![0.0; p];
    let mut sum = 0.0;
    for _ in 0..draws {
        let i = model.chain.draw_from(rho, &mut rng);
        model.noise.fill(&mut rng, &mut eps);
        linalg::mat_vec_into(&model.sigma[i], &eps, &mut e);
        sum += linalg::euclid(&e).ln().max(0.0);
    }
    sum / draws as f64
}

pub fn diagnose(model: &SwitchingModel, opts: &DiagnoseOptions) -> Result<DiagnosisReport> {
    model.validate()?;
    let chain = model.chain.diagnostics();
    if !chain.irreducible {
        return Err(Error::NotErgodic("regime chain is reducible".into()));
    }
    let rho = chain.rho.clone().ok_or_else(|| Error::NotErgodic("no stationary law".into()))?;
    let mut warnings = Vec::new();
    if !chain.aperiodic {
        warnings.push(format!(
            "regime chain is periodic (period {}); convergence to the stationary law is not guaranteed",
            chain.period.unwrap_or(0)
        ));
    }
    if model.exogenous.is_some() {
        warnings.push("exogenous input shifts the mean only; exponents ignore it".into());
    }

    let lyap = lyapunov::estimate_top(model, opts.n, opts.replicates, opts.seed)?;
    let cb_bounds = NormKind::ALL
        .iter()
        .map(|&norm| NormBound { norm, bound: lyapunov::cb_bound(model, &rho, norm) })
        .collect();
    let closed = closed_form(model, &rho, &mut warnings);
    if let Some(c) = &closed {
        let top = c.top();
        let gap = (top - lyap.lambda).abs();
        if top.is_finite() && lyap.lambda.is_finite() && gap > VERDICT_SIGMAS * lyap.stderr + 0.02 {
            warnings.push(format!("{} closed form {top:.6} differs from the Monte Carlo estimate {:.6}", c.method, lyap.lambda));
        }
    }

    let (phi, second_order) = match moments::estimate_phi(model, opts.phi_n_max, opts.phi_trials, rng::child_seed(opts.seed, 1), NormKind::Operator2)
        .and_then(|p| moments::fit_decay(&p, opts.window))
    {
        Ok(fit) => {
            let lambda = closed.as_ref().map(ClosedForm::top).unwrap_or(lyap.lambda);
            let verdict = moments::check_second_order(Some(lambda), &fit);
            if verdict.jensen_consistent == Some(false) {
                warnings.push(verdict.note.clone());
            }
            (Some(fit), Some(verdict))
        }
        Err(e) => {
            warnings.push(format!("second-order decay fit unavailable: {e}"));
            (None, None)
        }
    };

    let noise_moment = noise_log_moment(model, &rho, NOISE_MOMENT_DRAWS, rng::child_seed(opts.seed, 2));
    let start_sensitivity = if opts.start_sensitivity {
        Some(lyapunov::start_sensitivity(model, opts.n, opts.replicates, rng::child_seed(opts.seed, 3))?)
    } else {
        None
    };

    let mut verdict = decide(&lyap, closed.as_ref(), noise_moment);
    if verdict == Verdict::StationaryStable && !chain.aperiodic {
        warnings.push("stable exponent, but a periodic chain cannot be certified; verdict downgraded".into());
        verdict = Verdict::Inconclusive;
    }

    Ok(DiagnosisReport {
        model_hash: model.hash(),
        chain,
        lyapunov: lyap,
        cb_bounds,
        closed_form: closed,
        phi,
        second_order,
        verdict,
        noise_log_moment: noise_moment,
        start_sensitivity,
        settings: *opts,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(lambda: f64, stderr: f64) -> LyapunovEstimate {
        LyapunovEstimate {
            lambda,
            spectrum: None,
            spectrum_stderr: None,
            stderr,
            n: 1,
            replicates: 1,
            restarts: 0,
            cb_bound: 0.0,
            norm_name: NormKind::Operator2,
            method: "mc".into(),
        }
    }

    #[test]
    fn tri_state_logic() {
        assert_eq!(decide(&est(-0.1, 0.01), None, 0.1), Verdict::StationaryStable);
        assert_eq!(decide(&est(-0.1, 0.04), None, 0.1), Verdict::Inconclusive);
        assert_eq!(decide(&est(-0.1, 0.01), None, f64::INFINITY), Verdict::Inconclusive);
        assert_eq!(decide(&est(0.1, 0.01), None, 0.1), Verdict::Unstable);
        let cf = |x: f64| ClosedForm { method: "triangular".into(), spectrum: vec![x] };
        assert_eq!(decide(&est(0.1, 0.01), Some(&cf(-0.2)), 0.0), Verdict::StationaryStable);
        assert_eq!(decide(&est(0.0, 0.0), Some(&cf(0.0)), 0.0), Verdict::Inconclusive);
        assert_eq!(decide(&est(-1.0, 0.0), Some(&cf(0.3)), 0.0), Verdict::Unstable);
        assert_eq!(decide(&est(-1.0, 0.0), Some(&cf(f64::NEG_INFINITY)), 0.0), Verdict::StationaryStable);
    }

    #[test]
    fn swapped_chain_permutes() {
        let c = RegimeChain::new(vec![vec![0.3, 0.7], vec![0.4, 0.6]], InitLaw::State(0)).unwrap();
        let s = swapped_chain(&c).unwrap();
        assert_eq!(s.transition(), &[vec![0.6, 0.4], vec![0.7, 0.3]]);
        assert_eq!(s.init_distribution(), vec![0.0, 1.0]);
    }
}
