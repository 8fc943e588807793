//! JSON model configuration.
//!
//! ```json
//! {
//!   "chain": { "P": [[0.2, 0.8], [0.8, 0.2]], "init": [0.5, 0.5] },
//!   "dim": 2,
//!   "B": [ [[0.1, 0.0], [0.0, 0.0]], [[100.0, -1000.0], [9.99, -99.9]] ],
//!   "Sigma": [ ... ],            // optional, identity per regime
//!   "mu": [ [0.0, 0.0], ... ],   // optional, zero per regime
//!   "noise": "gaussian",         // optional
//!   "sma": { "C": [ [lag-1 matrix per regime], ... ] },   // optional, replaces "B"
//!   "exogenous": { "path": "input.csv", "coeffs": [[0.0], [0.3], [0.0]] }
//! }
//! ```
//!
//! `init` is either a distribution or a 1-based starting regime. The
//! exogenous block may carry the series inline under `series` instead of
//! `path`; a relative path resolves against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::csv;
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, Mat, Vector};
use crate::markov::{InitLaw, RegimeChain};
use crate::model::{Exogenous, NoiseFamily, SmaModel, SwitchingModel};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(rename = "P")]
    pub p: Rows,
    pub init: InitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitConfig {
    /// 1-based regime index.
    State(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmaConfig {
    /// `C[j][i]`: lag `j + 1` matrix of regime `i + 1`.
    #[serde(rename = "C")]
    pub c: Vec<Vec<Rows>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExogenousConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<f64>>,
    /// Per-regime loading vectors.
    pub coeffs: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub chain: ChainConfig,
    pub dim: usize,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Rows>>,
    #[serde(rename = "Sigma", default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Rows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Rows>,
    #[serde(default)]
    pub noise: NoiseFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sma: Option<SmaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exogenous: Option<ExogenousConfig>,
}

/// A parsed model: the SVAR(1) form or a switching moving average.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfiguredModel {
    Svar(SwitchingModel),
    Sma(SmaModel),
}

impl ConfiguredModel {
    pub fn chain(&self) -> &RegimeChain {
        match self {
            ConfiguredModel::Svar(m) => &m.chain,
            ConfiguredModel::Sma(m) => &m.chain,
        }
    }

    /// The SVAR(1) model, or an error naming the operation that needs it.
    pub fn into_svar(self, what: &str) -> Result<SwitchingModel> {
        match self {
            ConfiguredModel::Svar(m) => Ok(m),
            ConfiguredModel::Sma(_) => Err(Error::InvalidArgument(format!("{what} needs an SVAR model (config has an \"sma\" block)"))),
        }
    }
}

fn matrix(rows: &Rows, p: usize, field: &str) -> Result<Mat> {
    if rows.len() != p {
        return Err(Error::Config(format!("{field}: expected {p} rows, found {}", rows.len())));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::Config(format!("{field}[{k}]: expected {p} entries, found {}", row.len())));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!("{field}[{k}][{j}]: entry is not finite")));
        }
    }
    Ok(from_rows(rows))
}

fn matrices(list: &[Rows], r: usize, p: usize, field: &str) -> Result<Vec<Mat>> {
    if list.len() != r {
        return Err(Error::Config(format!("{field}: expected {r} matrices (one per regime), found {}", list.len())));
    }
    list.iter().enumerate().map(|(i, m)| matrix(m, p, &format!("{field}[{i}]"))).collect()
}

fn vectors(list: &Rows, r: usize, p: usize, field: &str) -> Result<Vec<Vector>> {
    if list.len() != r {
        return Err(Error::Config(format!("{field}: expected {r} vectors (one per regime), found {}", list.len())));
    }
    list.iter()
        .enumerate()
        .map(|(i, v)| {
            if v.len() != p {
                return Err(Error::Config(format!("{field}[{i}]: expected length {p}, found {}", v.len())));
            }
            Ok(Vector::from_column_slice(v))
        })
        .collect()
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid model config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chain(&self) -> Result<RegimeChain> {
        let r = self.chain.p.len();
        let init = match &self.chain.init {
            InitConfig::State(k) => {
                if *k == 0 || *k > r {
                    return Err(Error::Config(format!("chain.init: regime {k} outside 1..={r}")));
                }
                InitLaw::State(k - 1)
            }
            InitConfig::Distribution(d) => InitLaw::Distribution(d.clone()),
        };
        RegimeChain::new(self.chain.p.clone(), init)
    }

    /// Builds the model. Relative exogenous paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<ConfiguredModel> {
        let chain = self.chain()?;
        let r = chain.regimes();
        let p = self.dim;
        if p == 0 {
            return Err(Error::Config("dim: must be at least 1".into()));
        }
        let sigma = match &self.sigma {
            Some(s) => matrices(s, r, p, "Sigma")?,
            None => vec![Mat::identity(p, p); r],
        };
        if let Some(sma) = &self.sma {
            if self.b.is_some() || self.mu.is_some() || self.exogenous.is_some() {
                return Err(Error::Config("sma: cannot be combined with \"B\", \"mu\" or \"exogenous\"".into()));
            }
            let c = sma
                .c
                .iter()
                .enumerate()
                .map(|(j, lag)| matrices(lag, r, p, &format!("sma.C[{j}]")))
                .collect::<Result<Vec<_>>>()?;
            return Ok(ConfiguredModel::Sma(SmaModel::new(chain, c, sigma, self.noise)?));
        }
        let b = matrices(self.b.as_ref().ok_or_else(|| Error::Config("missing field `B`".into()))?, r, p, "B")?;
        let mu = match &self.mu {
            Some(m) => vectors(m, r, p, "mu")?,
            None => vec![Vector::zeros(p); r],
        };
        let mut model = SwitchingModel::new(chain, b)?.with_sigma(sigma)?.with_mu(mu)?.with_noise(self.noise);
        if let Some(exo) = &self.exogenous {
            let coeffs = vectors(&exo.coeffs, r, p, "exogenous.coeffs")?;
            let series = match (&exo.series, &exo.path) {
                (Some(s), None) => s.clone(),
                (None, Some(path)) => {
                    let mut full = PathBuf::from(path);
                    if full.is_relative() {
                        if let Some(dir) = base_dir {
                            full = dir.join(full);
                        }
                    }
                    csv::read_series(&full)?
                }
                _ => return Err(Error::Config("exogenous: give exactly one of \"path\" or \"series\"".into())),
            };
            model = model.with_exogenous(Exogenous { coeffs, series })?;
        }
        Ok(ConfiguredModel::Svar(model))
    }

    /// Config reproducing `model`. The exogenous series is referenced by
    /// `input_path` when given, otherwise stored inline.
    pub fn from_model(model: &SwitchingModel, input_path: Option<&str>) -> Self {
        let vec_rows = |v: &[Vector]| v.iter().map(|x| x.iter().copied().collect()).collect::<Rows>();
        Self {
            chain: chain_config(&model.chain),
            dim: model.dim,
            b: Some(model.b.iter().map(to_rows).collect()),
            sigma: Some(model.sigma.iter().map(to_rows).collect()),
            mu: Some(vec_rows(&model.mu)),
            noise: model.noise,
            sma: None,
            exogenous: model.exogenous.as_ref().map(|e| ExogenousConfig {
                path: input_path.map(str::to_string),
                series: if input_path.is_some() { None } else { Some(e.series.clone()) },
                coeffs: vec_rows(&e.coeffs),
            }),
        }
    }

    pub fn from_sma(model: &SmaModel) -> Self {
        Self {
            chain: chain_config(&model.chain),
            dim: model.dim,
            b: None,
            sigma: Some(model.sigma.iter().map(to_rows).collect()),
            mu: None,
            noise: model.noise,
            sma: Some(SmaConfig { c: model.c.iter().map(|lag| lag.iter().map(to_rows).collect()).collect() }),
            exogenous: None,
        }
    }
}

fn chain_config(chain: &RegimeChain) -> ChainConfig {
    ChainConfig {
        p: chain.transition().to_vec(),
        init: match chain.init() {
            InitLaw::State(k) => InitConfig::State(k + 1),
            InitLaw::Distribution(d) => InitConfig::Distribution(d.clone()),
        },
    }
}

/// Reads and builds a model config file.
pub fn load(path: &Path) -> Result<ConfiguredModel> {
    ModelConfig::from_path(path)?.build(path.parent())
}
