mod common;

use common::*;
use switchvar::ks;
use switchvar::model::{
    companion_embed_scalar, simulate, stationary_one_step_check, stationary_solution_sample, NoiseFamily, SmaModel,
};
use switchvar::scenarios;
use switchvar::linalg::Mat;
use switchvar::{RegimeChain, SwitchingModel};

#[test]
fn companion_form_reproduces_the_scalar_recursion() {
    let chain = RegimeChain::stationary_start(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let ar = vec![vec![0.5, -0.2, 0.1], vec![0.1, 0.3, 0.2]];
    let (mu, sigma) = ([0.4, -1.0], [1.0, 2.5]);
    for noise in [NoiseFamily::Gaussian, NoiseFamily::Laplace] {
        let model = companion_embed_scalar(chain.clone(), &ar, &mu, &sigma, noise).unwrap();
        let n = 500;
        let t = simulate(&model, &[0.3, -0.1, 0.7], n, 9).unwrap();
        let regimes = model.regime_path(n, 9);
        let eps = model.noise_draws(n, 9);
        // y holds y_{k}, y_{k-1}, y_{k-2}
        let mut y = vec![0.3, -0.1, 0.7];
        for k in 1..=n {
            let i = regimes[k];
            let mut acc = mu[i];
            for (j, a) in ar[i].iter().enumerate() {
                acc += a * y[j];
            }
            acc += sigma[i] * eps[k - 1][0];
            y.insert(0, acc);
            y.truncate(3);
            assert_eq!(t.x[k][0], acc, "k={k}");
        }
    }
}

#[test]
fn example3_paths_diverge_at_the_exponent_rate() {
    let s = scenarios::example3().unwrap();
    let mut diverged = 0;
    let mut rates = Vec::new();
    for seed in 0..20 {
        let t = simulate(&s.model, &[1.0, 1.0], 10_000, seed).unwrap();
        if let Some(k) = t.diverged_at {
            diverged += 1;
            // growth from the last recorded state, log(1e150) over the steps taken
            let last = t.x.last().unwrap();
            let norm = last.iter().map(|v| v * v).sum::<f64>().sqrt();
            rates.push(norm.ln() / (k - 1) as f64);
        }
    }
    assert!(diverged >= 15, "{diverged}");
    let m = mean(&rates);
    assert!((m - 0.4605).abs() < 0.1, "{m}");
}

#[test]
fn one_step_extension_is_stationary() {
    let model = SwitchingModel::scalar(RegimeChain::stationary_start(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(), &[0.5, -0.8]).unwrap();
    let checks = stationary_one_step_check(&model, 120, 10_000, 3).unwrap();
    assert!(checks.iter().all(|c| c.residual <= c.bound * (1.0 + 1e-9) + 1e-12));
    let w0: Vec<f64> = checks.iter().map(|c| c.w0).collect();
    let w1: Vec<f64> = checks.iter().map(|c| c.w1).collect();
    assert!(!ks::two_sample(&w0, &w1, 0.01).rejects());
}

#[test]
fn example5_simulated_mean_matches_the_stationary_series() {
    let s = scenarios::example5().unwrap();
    let st = stationary_solution_sample(&s.model, 400, 10_000, 4).unwrap();
    let w: Vec<f64> = st.draws.iter().map(|d| d[0]).collect();
    let (mw, se_w) = (mean(&w), (variance(&w) / w.len() as f64).sqrt());
    let n = 10_000;
    let t = simulate(&s.model, &[0.0; 4], n + 500, 5).unwrap();
    let x: Vec<f64> = t.x[501..].iter().map(|v| v[0]).collect();
    // batch means for the serially correlated path
    let batches: Vec<f64> = x.chunks(n / 20).map(mean).collect();
    let se_x = (variance(&batches) / batches.len() as f64).sqrt();
    let se = (se_w * se_w + se_x * se_x).sqrt();
    assert!((mean(&x) - mw).abs() < 4.0 * se, "{} vs {mw} (se {se})", mean(&x));
}

#[test]
fn ma1_with_scaled_identity() {
    let c = 0.6;
    let sma = SmaModel::new(RegimeChain::trivial(), vec![vec![Mat::identity(2, 2) * c]], vec![Mat::identity(2, 2) * 1.5], NoiseFamily::Gaussian).unwrap();
    let t = switchvar::model::simulate_sma(&sma, 100_000, 1).unwrap();
    let x: Vec<f64> = t.x.iter().map(|v| v[0]).collect();
    let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (x.len() - 1) as f64;
    // c * sigma^2 for each coordinate
    assert!((lag1 - c * 2.25).abs() < 0.05, "{lag1}");
}
