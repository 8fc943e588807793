//! Two-sample Kolmogorov-Smirnov statistic with the asymptotic critical value.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Critical value at level `alpha` for these sample sizes.
    pub critical: f64,
    pub alpha: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.statistic > self.critical
    }
}

/// `sup_x |F1(x) - F2(x)|` over the pooled sample.
pub fn statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Asymptotic critical value `c(alpha) sqrt((n1 + n2) / (n1 n2))`.
pub fn critical_value(n1: usize, n2: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n1 + n2) as f64 / (n1 as f64 * n2 as f64)).sqrt()
}

/// Kolmogorov survival function `Q(t) = 2 sum (-1)^(k-1) exp(-2 k^2 t^2)`.
fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        s += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    let d = statistic(a, b);
    let (n1, n2) = (a.len(), b.len());
    let en = (n1 as f64 * n2 as f64 / (n1 + n2) as f64).sqrt();
    KsResult {
        statistic: d,
        critical: critical_value(n1, n2, alpha),
        alpha,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
        n1,
        n2,
    }
}
