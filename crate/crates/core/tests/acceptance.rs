//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p switchvar --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use switchvar::linalg::{self, Vector};
use switchvar::lyapunov::{self, cb_bound, closed_form_triangular, pincus_singular};
use switchvar::markov::{coupling_tail_bound, coupling_time_samples, survival_curve};
use switchvar::model::{stationary_one_step_check, stationary_solution_sample};
use switchvar::moments::{autocovariance_check, estimate_phi, fit_decay};
use switchvar::report::{diagnose, DiagnoseOptions, Verdict};
use switchvar::scenarios;
use switchvar::stability::{contraction_experiment, contraction_replicates, distribution_convergence};
use switchvar::{NormKind, RegimeChain, SwitchingModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Upper 99.9% point of Binomial(m, q) by direct summation.
fn binomial_upper(m: usize, q: f64) -> usize {
    let mut cdf = 0.0;
    let mut pmf = (1.0 - q).powi(m as i32);
    for k in 0..=m {
        cdf += pmf;
        if cdf >= 0.999 {
            return k;
        }
        pmf *= (m - k) as f64 / (k + 1) as f64 * q / (1.0 - q);
    }
    m
}

/// Two-sided normal tail mass beyond `z` standard errors.
fn normal_tail(z: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 for erfc, ample for a rate estimate
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

fn criterion_1() -> Outcome {
    const LAMBDA: f64 = 0.460517018598809;
    let s = scenarios::example3().unwrap();
    let radii: Vec<f64> = s.model.b.iter().map(|m| eig_moduli_2x2(m)[0].max(eig_moduli_2x2(m)[1])).collect();
    let radii_ok = radii.iter().all(|r| (r - 0.1).abs() < 1e-12);
    let e = lyapunov::estimate_top(&s.model, 100_000, 32, 1).unwrap();
    let cp = s.canonical_pair.as_ref().unwrap();
    let pincus = pincus_singular(&cp.b1, &cp.b2, &s.model.chain, 0.5, 100).unwrap().lambda;
    let pass = radii_ok && (e.lambda - LAMBDA).abs() < 0.05 && (pincus - LAMBDA).abs() < 1e-10;
    outcome(pass, format!("radii {radii:?}, mc {:.4} +/- {:.4}, singular-pair closed form {pincus:.12}", e.lambda, e.stderr))
}

fn example4_stable(rho: f64) -> bool {
    let s = scenarios::example4(rho).unwrap();
    let cf = closed_form_triangular(&s.model, &s.model.chain.rho().unwrap()).unwrap();
    cf.iter().all(|l| *l < 0.0)
}

/// Boundary of the stable set between a stable and an unstable point.
fn bisect(mut stable: f64, mut unstable: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (stable + unstable);
        if example4_stable(mid) {
            stable = mid;
        } else {
            unstable = mid;
        }
    }
    0.5 * (stable + unstable)
}

fn criterion_2() -> Outcome {
    let (lo, hi) = (bisect(0.5, 0.01), bisect(0.5, 0.99));
    let grid_ok = (1..100).map(|k| k as f64 / 100.0).all(|rho| example4_stable(rho) == (rho > lo && rho < hi));
    let window_ok = (lo - 0.36907).abs() < 5e-6 && (hi - 0.61315).abs() < 5e-6;
    let s = scenarios::example4(0.5).unwrap();
    let e = lyapunov::estimate_spectrum(&s.model, 100_000, 32, 2).unwrap();
    let sp = e.spectrum.unwrap();
    let mc_ok = (sp[0] + 0.1438).abs() < 0.02 && (sp[1] + 0.2027).abs() < 0.02;
    outcome(grid_ok && window_ok && mc_ok, format!("window ({lo:.5}, {hi:.5}), spectrum ({:.4}, {:.4})", sp[0], sp[1]))
}

fn criterion_3() -> Outcome {
    let s = scenarios::example5().unwrap();
    let radius = linalg::spectral_radius(&s.model.b[0]);
    let rep = diagnose(&s.model, &DiagnoseOptions::default()).unwrap();
    let conv = distribution_convergence(&s.model, &s.inits, 300, 10_000, 3).unwrap();
    let worst = conv.entries.iter().map(|e| e.ks.statistic / e.ks.critical).fold(0.0, f64::max);
    let pass = radius < 1.0 && rep.verdict == Verdict::StationaryStable && conv.all_pass;
    outcome(pass, format!("radius {radius:.4}, verdict {}, worst KS/critical {worst:.3}", rep.verdict.name()))
}

fn criterion_4() -> Outcome {
    const TRIALS: usize = 20_000;
    const N_MAX: usize = 50;
    let mut g = rng(401);
    let (mut lyap_fail, mut phi_total, mut phi_fail, mut screened) = (0, 0, 0, 0);
    let mut k = 0;
    while k < 20 {
        let r = 1 + k % 4;
        let chain = random_chain(r, &mut g);
        let b = random_scalars(r, &mut g);
        let p = chain.transition().to_vec();
        let w: Vec<f64> = b.iter().map(|x| x.abs()).collect();
        let w2: Vec<f64> = b.iter().map(|x| x * x).collect();
        let exact = transfer_powers(&p, &w, N_MAX);
        // a 3-stderr band needs the sample mean in its CLT regime: relative
        // variance of the product at most TRIALS / 100, from the exact second moment
        let second = transfer_powers(&p, &w2, N_MAX);
        if (0..r).any(|i| second[N_MAX - 1][i] / exact[N_MAX - 1][i].powi(2) > TRIALS as f64 / 100.0) {
            screened += 1;
            continue;
        }
        let rho = chain.rho().unwrap();
        let model = SwitchingModel::scalar(chain, &b).unwrap();
        let e = lyapunov::estimate_top(&model, 100_000, 32, k as u64).unwrap();
        // single-regime sums are deterministic up to rounding
        if (e.lambda - scalar_exponent(&b, &rho)).abs() > 3.0 * e.stderr + 1e-10 {
            lyap_fail += 1;
        }
        let phi = estimate_phi(&model, N_MAX, TRIALS, k as u64, NormKind::Operator2).unwrap();
        for n in 0..N_MAX {
            for i in 0..r {
                phi_total += 1;
                if (phi.values[n][i] - exact[n][i]).abs() > 3.0 * phi.stderr[n][i] + 1e-10 * exact[n][i] {
                    phi_fail += 1;
                }
            }
        }
        k += 1;
    }
    // every comparison is a 3-sigma test, so a few misses are expected by chance
    let rate = normal_tail(3.0);
    let (lyap_cap, phi_cap) = (binomial_upper(20, rate), binomial_upper(phi_total, rate));
    let pass = lyap_fail <= lyap_cap && phi_fail <= phi_cap;
    outcome(
        pass,
        format!(
            "lambda outside 3se {lyap_fail}/20 (cap {lyap_cap}), phi outside 3se {phi_fail}/{phi_total} (cap {phi_cap}), \
             {screened} heavy-tailed candidates screened out"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut g = rng(501);
    let mut violations = Vec::new();
    for k in 0..50 {
        let model = random_vector_model(1 + k % 4, 1 + (k / 4) % 3, &mut g);
        let rho = model.chain.rho().unwrap();
        let e = lyapunov::estimate_top(&model, 20_000, 16, k as u64).unwrap();
        for norm in NormKind::ALL {
            if e.lambda > cb_bound(&model, &rho, norm) + 3.0 * e.stderr + 1e-12 {
                violations.push(format!("model {k} {norm}"));
            }
        }
    }
    let mut jensen_fail = 0;
    for k in 0..20 {
        let r = 2 + k % 3;
        let chain = random_chain(r, &mut g);
        let b = random_scalars(r, &mut g);
        let rho = chain.rho().unwrap();
        let model = SwitchingModel::scalar(chain, &b).unwrap();
        let e = lyapunov::estimate_top(&model, 20_000, 16, k as u64).unwrap();
        let log_mean_abs = rho.iter().zip(&b).map(|(w, x)| w * x.abs()).sum::<f64>().ln();
        if e.lambda >= log_mean_abs {
            jensen_fail += 1;
        }
    }
    outcome(
        violations.is_empty() && jensen_fail == 0,
        format!("bound violations {violations:?}, Jensen failures {jensen_fail}/20"),
    )
}

fn criterion_6() -> Outcome {
    let mut g = rng(601);
    let (mut bound_fail, mut oracle_fail, mut total) = (0, 0, 0);
    let trials = 20_000;
    for k in 0..10 {
        let r = 2 + k % 3;
        let chain = random_chain(r, &mut g);
        let p = chain.transition().to_vec();
        let b = coupling_tail_bound(&chain).unwrap();
        let horizon = 25;
        let samples = coupling_time_samples(&chain, 0, r - 1, trials, horizon, k as u64).unwrap();
        let exact = product_chain_survival(&p, 0, r - 1, horizon);
        for (n, (s, se)) in survival_curve(&samples, horizon).into_iter().enumerate() {
            total += 1;
            if s > b.survival_bound(n) * (1.0 + 5.0 * se) {
                bound_fail += 1;
            }
            // binomial error at the oracle value, so that an empty tail is not a zero-width test
            let se_oracle = (exact[n] * (1.0 - exact[n]) / trials as f64).sqrt();
            if (s - exact[n]).abs() > 4.0 * se.max(se_oracle) + 1e-12 {
                oracle_fail += 1;
            }
        }
    }
    outcome(bound_fail == 0 && oracle_fail == 0, format!("bound failures {bound_fail}/{total}, oracle failures {oracle_fail}/{total}"))
}

fn criterion_7() -> Outcome {
    let mut g = rng(701);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let p = 1 + k % 4;
        let model = random_vector_model(p, 1 + k % 3, &mut g);
        let x0: Vec<f64> = (0..p).map(|i| 1.0 + i as f64).collect();
        let x0p: Vec<f64> = (0..p).map(|i| -(i as f64) - 2.0).collect();
        worst = worst.max(contraction_experiment(&model, &x0, &x0p, 300, k as u64).unwrap().max_relative_error);
    }
    let s = scenarios::example4(0.5).unwrap();
    let sum = contraction_replicates(&s.model, &[1e140, 3e139], &[-1e140, -2e139], 1500, 32, 7).unwrap();
    worst = worst.max(sum.max_relative_error);
    let e = lyapunov::estimate_top(&s.model, 100_000, 32, 7).unwrap();
    let se = (sum.stderr.powi(2) + e.stderr.powi(2)).sqrt();
    let pass = worst < 1e-9 && (sum.mean_slope - e.lambda).abs() < 4.0 * se;
    outcome(pass, format!("max relative error {worst:.2e}, slope {:.4} vs lambda {:.4} (se {se:.4})", sum.mean_slope, e.lambda))
}

fn criterion_8() -> Outcome {
    let mut g = rng(801);
    let mut residual_ok = true;
    for k in 0..5 {
        let chain = random_chain(2, &mut g);
        let b: Vec<f64> = random_scalars(2, &mut g).iter().map(|x| x.clamp(-0.9, 0.9)).collect();
        let model = SwitchingModel::scalar(chain, &b).unwrap();
        let checks = stationary_one_step_check(&model, 120, 2000, k).unwrap();
        residual_ok &= checks.iter().all(|c| c.residual <= c.bound * (1.0 + 1e-9) + 1e-12);
    }
    let ar = SwitchingModel::scalar(RegimeChain::trivial(), &[0.5]).unwrap();
    let v: Vec<f64> = stationary_solution_sample(&ar, 60, 10_000, 8).unwrap().draws.iter().map(|d| d[0]).collect();
    let var = variance(&v);
    let shifted = ar.clone().with_mu(vec![Vector::from_element(1, 1.0)]).unwrap();
    let m: Vec<f64> = stationary_solution_sample(&shifted, 60, 10_000, 9).unwrap().draws.iter().map(|d| d[0]).collect();
    let mu = mean(&m);
    let pass = residual_ok && (var - 4.0 / 3.0).abs() < 0.05 && (mu - 2.0).abs() < 0.05;
    outcome(pass, format!("residual bound {residual_ok}, variance {var:.4}, mean {mu:.4}"))
}

fn criterion_9() -> Outcome {
    let mut g = rng(901);
    let mut failures = Vec::new();
    for k in 0..5 {
        let chain = random_chain(2, &mut g);
        let b: Vec<f64> = random_scalars(2, &mut g).iter().map(|x| x.clamp(-0.95, 0.95)).collect();
        let model = SwitchingModel::scalar(chain, &b).unwrap();
        let phi = estimate_phi(&model, 50, 4000, k, NormKind::Operator2).unwrap();
        let fit = fit_decay(&phi, 0.5).unwrap();
        let t = autocovariance_check(&model, &phi, &fit, 1000, 200_000, 50, k).unwrap();
        failures.extend(t.rows.iter().filter(|r| !r.holds).map(|r| format!("model {k} lag {}", r.lag)));
    }
    let ar = SwitchingModel::scalar(RegimeChain::trivial(), &[0.5]).unwrap();
    let phi = estimate_phi(&ar, 50, 10, 0, NormKind::Operator2).unwrap();
    let fit = fit_decay(&phi, 0.5).unwrap();
    let t = autocovariance_check(&ar, &phi, &fit, 1000, 1_000_000, 50, 9).unwrap();
    let worst = t.rows.iter().map(|r| (r.autocorrelation - 0.5f64.powi(r.lag as i32)).abs()).fold(0.0, f64::max);
    let pass = failures.is_empty() && worst < 0.02;
    outcome(pass, format!("bound failures {failures:?}, AR(1) worst autocorrelation error {worst:.4}"))
}

fn criterion_10() -> Outcome {
    let s = scenarios::period2_control().unwrap();
    let rep = distribution_convergence(&s.model, &s.inits, 300, 10_000, 10).unwrap();
    let min = rep.entries.iter().map(|e| e.ks.statistic / e.ks.critical).fold(f64::INFINITY, f64::min);
    outcome(!rep.all_pass && min > 1.0, format!("smallest KS/critical {min:.2}"))
}

/// Name, optional runtime budget in seconds, check.
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("example 3 counterexample", Some(10), criterion_1),
        ("example 4 stability window", Some(10), criterion_2),
        ("example 5 stationarity", Some(60), criterion_3),
        ("scalar oracle equivalence", Some(60), criterion_4),
        ("bound suite", None, criterion_5),
        ("coupling", Some(30), criterion_6),
        ("contraction mechanics", None, criterion_7),
        ("stationary solution", None, criterion_8),
        ("autocovariance bound", None, criterion_9),
        ("period-2 negative control", None, criterion_10),
    ];
    let mut failed = 0;
    let start = Instant::now();
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut o = run();
        let elapsed = t.elapsed();
        if let Some(secs) = limit {
            if elapsed > Duration::from_secs(*secs) {
                o.pass = false;
                o.detail.push_str(&format!("; over the {secs} s budget"));
            }
        }
        if !o.pass {
            failed += 1;
        }
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name} [{:.1} s]: {}", k + 1, elapsed.as_secs_f64(), o.detail);
    }
    println!("{} of {} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
