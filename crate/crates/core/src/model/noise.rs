use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

/// Distribution of the standardized innovations `eps`. Every family has mean
/// zero and identity covariance; `DegenerateZero` draws exact zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    Uniform,
    Laplace,
    DegenerateZero,
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

impl NoiseFamily {
    /// Fills `out` with one standardized vector. `DegenerateZero` consumes no
    /// randomness.
    #[inline]
    pub fn fill(self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            NoiseFamily::Gaussian => out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
            NoiseFamily::Uniform => out.iter_mut().for_each(|x| *x = (2.0 * rng.random::<f64>() - 1.0) * SQRT_3),
            NoiseFamily::Laplace => out.iter_mut().for_each(|x| {
                // scale 1/sqrt(2) gives unit variance
                let u: f64 = rng.random::<f64>() - 0.5;
                *x = -std::f64::consts::FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln();
            }),
            NoiseFamily::DegenerateZero => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Uniform => "uniform",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::DegenerateZero => "degenerate-zero",
        }
    }
}

impl std::str::FromStr for NoiseFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown noise family '{s}'"))
    }
}
