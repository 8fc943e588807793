//! Built-in models with known ground truth.
//!
//! Each scenario carries the model, the expected diagnostic values with a note
//! on where each value comes from, and initial conditions suitable for the
//! distribution-convergence experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csv;
use crate::error::{Error, Result};
use crate::linalg::{self, from_rows, Vector};
use crate::lyapunov::{self, SingularPairBasis};
use crate::markov::{InitLaw, RegimeChain};
use crate::model::{companion_embed_scalar, Exogenous, NoiseFamily, SwitchingModel};
use crate::serde_float;
use crate::stability::InitialCondition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub key: String,
    #[serde(with = "serde_float")]
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: SwitchingModel,
    pub expected: Vec<Expected>,
    /// Expected verdict: `stationary-stable`, `unstable` or `inconclusive`.
    pub verdict: &'static str,
    /// Starting conditions in different regimes for convergence experiments.
    pub inits: Vec<InitialCondition>,
    /// Example 3 only: the pair in the basis where `B_1 = diag(delta, 0)`.
    pub canonical_pair: Option<SingularPairBasis>,
    /// Path of the exogenous input file, when the model reads one.
    pub input_path: Option<String>,
}

impl Scenario {
    pub fn expected(&self, key: &str) -> Option<f64> {
        self.expected.iter().find(|e| e.key == key).map(|e| e.value)
    }

    fn push(&mut self, key: &str, value: f64, provenance: &str) {
        self.expected.push(Expected { key: key.into(), value, provenance: provenance.into() });
    }
}

pub const NAMES: [&str; 6] = ["example2", "example3", "example4", "example5", "example6", "period2"];

fn verdict_from(lambda: f64) -> &'static str {
    if lambda < 0.0 {
        "stationary-stable"
    } else if lambda > 0.0 {
        "unstable"
    } else {
        "inconclusive"
    }
}

fn stationary_chain(p: Vec<Vec<f64>>) -> Result<RegimeChain> {
    RegimeChain::stationary_start(p)
}

fn default_inits(model: &SwitchingModel, magnitude: f64) -> Vec<InitialCondition> {
    let r = model.regimes().min(2);
    (0..r.max(2))
        .map(|k| InitialCondition {
            x0: vec![if k % 2 == 0 { magnitude } else { -magnitude }; model.dim],
            regime: k % model.regimes(),
        })
        .collect()
}

/// Scalar switching AR(1) with coefficients `b` under `chain`.
pub fn example2(b: &[f64], chain: RegimeChain) -> Result<Scenario> {
    let rho = chain.rho()?;
    let model = SwitchingModel::scalar(chain, b)?;
    let lambda: f64 = rho.iter().zip(b).filter(|(w, _)| **w > 0.0).map(|(w, x)| w * x.abs().ln()).sum();
    let inits = default_inits(&model, 10.0);
    let mut s = Scenario {
        name: "example2".into(),
        model,
        expected: vec![],
        verdict: verdict_from(lambda),
        inits,
        canonical_pair: None,
        input_path: None,
    };
    s.push("lambda", lambda, "sum_i rho_i log|b_i| (scalar exponent is the stationary mean of log|a_n|)");
    Ok(s)
}

/// Default Example 2 instance: one stable and one random-walk regime.
pub fn example2_default() -> Result<Scenario> {
    example2(&[0.5, 1.0], stationary_chain(vec![vec![0.5, 0.5], vec![0.5, 0.5]])?)
}

/// Parameters of the mixed-stable counterexample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example3Params {
    pub delta1: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub p12: f64,
    pub p21: f64,
}

impl Default for Example3Params {
    fn default() -> Self {
        Self { delta1: 0.1, b1: 100.0, b2: 9.99, c: 10.0, p12: 0.8, p21: 0.8 }
    }
}

impl Example3Params {
    /// Three-term closed form for the two singular regimes.
    pub fn closed_form_lambda(&self) -> f64 {
        let s = self.p12 + self.p21;
        let d2 = self.b1 - self.c * self.b2;
        self.p21 / s * self.delta1.abs().ln() + self.p12 / s * d2.abs().ln() + self.p12 * self.p21 / s * (self.b1 / d2).abs().ln()
    }
}

/// Two regimes with spectral radius 0.1 each whose switching product grows.
pub fn example3() -> Result<Scenario> {
    example3_with(Example3Params::default())
}

pub fn example3_with(par: Example3Params) -> Result<Scenario> {
    let chain = stationary_chain(vec![vec![1.0 - par.p12, par.p12], vec![par.p21, 1.0 - par.p21]])?;
    let b1 = from_rows(&[vec![par.delta1, 0.0], vec![0.0, 0.0]]);
    let b2 = from_rows(&[vec![par.b1, -par.c * par.b1], vec![par.b2, -par.c * par.b2]]);
    let canonical = lyapunov::canonicalize_singular_pair(&b1, &b2)?;
    let model = SwitchingModel::new(chain, vec![b1, b2])?;
    let lambda = par.closed_form_lambda();
    let inits = default_inits(&model, 1.0);
    let mut s = Scenario {
        name: "example3".into(),
        model,
        expected: vec![],
        verdict: verdict_from(lambda),
        inits,
        canonical_pair: Some(canonical),
        input_path: None,
    };
    s.push("spectral_radius_1", par.delta1.abs(), "B1 = diag(delta1, 0)");
    s.push("spectral_radius_2", (par.b1 - par.c * par.b2).abs(), "eigenvalues of B2 are 0 and b1 - c b2");
    s.push("lambda", lambda, "closed form for two singular 2x2 regimes with b1=100, c=10, b2=9.99, delta1=0.1, p12=p21=0.8");
    Ok(s)
}

/// Lower and upper end of the stationary regime-1 mass for which both
/// exponents of Example 4 are negative.
pub fn example4_window() -> (f64, f64) {
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    ((l3 - l2) / l3, l3 / (l2 + l3))
}

/// Exponents `(lambda_1, lambda_2)` of Example 4 at stationary mass `rho`.
pub fn example4_exponents(rho: f64) -> (f64, f64) {
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    (rho * l2 - (1.0 - rho) * l3, -rho * l2 + (1.0 - rho) * (l3 - l2))
}

/// Two unstable diagonal regimes; the mixture is stable inside a window of
/// stationary regime-1 mass.
pub fn example4(rho: f64) -> Result<Scenario> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::RhoOutOfUnit(rho));
    }
    let speed = 0.5;
    let p12 = (1.0 - rho) * speed;
    let p21 = rho * speed;
    let chain = RegimeChain::new(
        vec![vec![1.0 - p12, p12], vec![p21, 1.0 - p21]],
        InitLaw::Distribution(vec![rho, 1.0 - rho]),
    )?;
    let model = SwitchingModel::new(
        chain,
        vec![from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]), from_rows(&[vec![1.0 / 3.0, 0.0], vec![0.0, 1.5]])],
    )?;
    let (l1, l2) = example4_exponents(rho);
    let (lo, hi) = example4_window();
    let inits = default_inits(&model, 10.0);
    let mut s = Scenario {
        name: "example4".into(),
        model,
        expected: vec![],
        verdict: verdict_from(l1.max(l2)),
        inits,
        canonical_pair: None,
        input_path: None,
    };
    s.push("lambda_1", l1, "rho log 2 - (1 - rho) log 3");
    s.push("lambda_2", l2, "-rho log 2 + (1 - rho)(log 3 - log 2)");
    s.push("window_low", lo, "(log 3 - log 2) / log 3");
    s.push("window_high", hi, "log 3 / (log 2 + log 3)");
    Ok(s)
}

pub const EXAMPLE5_AR: [f64; 4] = [0.2932, 0.1055, 0.0026, 0.3812];

/// Fourth-order autoregression with a two-regime mean shift.
pub fn example5() -> Result<Scenario> {
    let chain = stationary_chain(vec![vec![0.9, 0.1], vec![0.25, 0.75]])?;
    let a = EXAMPLE5_AR.to_vec();
    let model = companion_embed_scalar(chain, &[a.clone(), a], &[1.0, -0.5], &[1.0, 1.0], NoiseFamily::Gaussian)?;
    let radius = linalg::spectral_radius(&model.b[0]);
    let inits = vec![
        InitialCondition { x0: vec![5.0; 4], regime: 0 },
        InitialCondition { x0: vec![-5.0; 4], regime: 1 },
        InitialCondition { x0: vec![0.0; 4], regime: 1 },
    ];
    let mut s = Scenario {
        name: "example5".into(),
        model,
        expected: vec![],
        verdict: verdict_from(radius.ln()),
        inits,
        canonical_pair: None,
        input_path: None,
    };
    s.push("coefficient_sum", EXAMPLE5_AR.iter().sum(), "a1 + a2 + a3 + a4 with a = (0.2932, 0.1055, 0.0026, 0.3812)");
    s.push("spectral_radius", radius, "spectral radius of the constant companion matrix");
    s.push("lambda", radius.ln(), "constant coefficient: exponent is log of the spectral radius");
    Ok(s)
}

/// Scalar three-regime mean-shift model (normal, rising, falling) where the
/// rising regime loads on the lagged exogenous input.
#[derive(Debug, Clone, PartialEq)]
pub struct Example6Params {
    pub b: [f64; 3],
    pub mu: [f64; 3],
    /// Loading of the rising regime on `u_{n-1}`.
    pub loading: f64,
    pub transition: Vec<Vec<f64>>,
}

impl Default for Example6Params {
    fn default() -> Self {
        Self {
            b: [0.9, 1.0, 0.8],
            mu: [0.0, 0.5, -0.5],
            loading: 0.3,
            transition: vec![vec![0.9, 0.05, 0.05], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]],
        }
    }
}

pub fn example6(input_csv: &Path) -> Result<Scenario> {
    if !input_csv.exists() {
        return Err(Error::MissingInput(input_csv.display().to_string()));
    }
    let series = csv::read_series(input_csv)?;
    let mut s = example6_with(&Example6Params::default(), series)?;
    s.input_path = Some(input_csv.display().to_string());
    Ok(s)
}

pub fn example6_with(par: &Example6Params, series: Vec<f64>) -> Result<Scenario> {
    let chain = stationary_chain(par.transition.clone())?;
    let rho = chain.rho()?;
    let model = SwitchingModel::scalar(chain, &par.b)?
        .with_mu(par.mu.iter().map(|&m| Vector::from_element(1, m)).collect())?
        .with_exogenous(Exogenous {
            coeffs: vec![Vector::zeros(1), Vector::from_element(1, par.loading), Vector::zeros(1)],
            series,
        })?;
    let lambda: f64 = rho.iter().zip(&par.b).map(|(w, x)| w * x.abs().ln()).sum();
    let inits = default_inits(&model, 10.0);
    let mut s = Scenario {
        name: "example6".into(),
        model,
        expected: vec![],
        verdict: verdict_from(lambda),
        inits,
        canonical_pair: None,
        input_path: None,
    };
    s.push("lambda", lambda, "sum_i rho_i log|b_i|; the exogenous term only shifts the mean");
    Ok(s)
}

/// Negative control: a period-2 regime chain with regime-dependent means. The
/// time-`n` marginal keeps the parity of the starting regime.
pub fn period2_control() -> Result<Scenario> {
    let chain = RegimeChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], InitLaw::Distribution(vec![0.5, 0.5]))?;
    let model = SwitchingModel::scalar(chain, &[0.5, 0.5])?
        .with_mu(vec![Vector::from_element(1, -5.0), Vector::from_element(1, 5.0)])?;
    let inits = vec![InitialCondition { x0: vec![0.0], regime: 0 }, InitialCondition { x0: vec![0.0], regime: 1 }];
    let mut s = Scenario {
        name: "period2".into(),
        model,
        expected: vec![],
        // stable exponent, but a periodic chain cannot be certified
        verdict: "inconclusive",
        inits,
        canonical_pair: None,
        input_path: None,
    };
    s.push("lambda", 0.5f64.ln(), "constant coefficient 0.5");
    Ok(s)
}

/// Scenario by name with default parameters. `example4` takes `rho`
/// (default 0.5); `example6` needs an input series path.
pub fn by_name(name: &str, rho: Option<f64>, input: Option<&Path>) -> Result<Scenario> {
    match name {
        "example2" => example2_default(),
        "example3" => example3(),
        "example4" => example4(rho.unwrap_or(0.5)),
        "example5" => example5(),
        "example6" => example6(input.ok_or_else(|| Error::MissingInput("example6 needs an input series".into()))?),
        "period2" => period2_control(),
        other => Err(Error::InvalidArgument(format!("unknown scenario '{other}' (known: {})", NAMES.join(", ")))),
    }
}
