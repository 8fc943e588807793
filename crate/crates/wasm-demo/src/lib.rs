//! Browser bindings: exponent curves for the two-regime examples and a
//! trajectory simulator for the built-in scenarios.
//!
//! Each exported function has a plain Rust twin so the numbers can be tested
//! natively.

use wasm_bindgen::prelude::*;

use switchvar::lyapunov;
use switchvar::model;
use switchvar::scenarios::{self, Example3Params};

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// Rows `(rho, lambda_1, lambda_2, mc_top, mc_stderr)` for the diagonal pair
/// as the stationary regime-1 mass sweeps (0, 1).
pub fn diagonal_pair_rows(points: usize, n: usize, seed: u64) -> Result<Vec<[f64; 5]>, switchvar::Error> {
    grid(0.02, 0.98, points)
        .into_iter()
        .map(|rho| {
            let s = scenarios::example4(rho)?;
            let (l1, l2) = scenarios::example4_exponents(rho);
            let mc = lyapunov::estimate_top(&s.model, n, 8, seed)?;
            Ok([rho, l1, l2, mc.lambda, mc.stderr])
        })
        .collect()
}

/// Rows `(p, closed_form, mc_top, mc_stderr)` for the singular pair with
/// symmetric switching probability `p`.
pub fn singular_pair_rows(points: usize, n: usize, seed: u64) -> Result<Vec<[f64; 4]>, switchvar::Error> {
    grid(0.05, 0.95, points)
        .into_iter()
        .map(|p| {
            let par = Example3Params { p12: p, p21: p, ..Example3Params::default() };
            let s = scenarios::example3_with(par)?;
            let mc = lyapunov::estimate_top(&s.model, n, 8, seed)?;
            Ok([p, par.closed_form_lambda(), mc.lambda, mc.stderr])
        })
        .collect()
}

/// Interleaved `(regime, x1)` pairs of one simulated path; regimes 1-based.
/// A diverged path stops early.
pub fn scenario_path(name: &str, rho: f64, n: usize, seed: u64) -> Result<Vec<f64>, switchvar::Error> {
    let s = scenarios::by_name(name, Some(rho), None)?;
    let x0 = vec![1.0; s.model.dim];
    let t = model::simulate(&s.model, &x0, n, seed)?;
    Ok(t.regimes.iter().zip(&t.x).flat_map(|(i, x)| [(*i + 1) as f64, x[0]]).collect())
}

fn js_err(e: switchvar::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Flattened rows of [`diagonal_pair_rows`], five numbers per row.
#[wasm_bindgen(js_name = diagonalPairCurve)]
pub fn diagonal_pair_curve(points: usize, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    Ok(diagonal_pair_rows(points, n, seed as u64).map_err(js_err)?.concat())
}

/// Flattened rows of [`singular_pair_rows`], four numbers per row.
#[wasm_bindgen(js_name = singularPairCurve)]
pub fn singular_pair_curve(points: usize, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    Ok(singular_pair_rows(points, n, seed as u64).map_err(js_err)?.concat())
}

#[wasm_bindgen(js_name = simulateScenario)]
pub fn simulate_scenario(name: &str, rho: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    scenario_path(name, rho, n, seed as u64).map_err(js_err)
}

/// Stability window of the diagonal pair, `[low, high]`.
#[wasm_bindgen(js_name = diagonalPairWindow)]
pub fn diagonal_pair_window() -> Vec<f64> {
    let (lo, hi) = scenarios::example4_window();
    vec![lo, hi]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_curve_tracks_closed_form() {
        let rows = diagonal_pair_rows(5, 20_000, 1).unwrap();
        assert_eq!(rows.len(), 5);
        for r in rows {
            let top = r[1].max(r[2]);
            assert!((r[3] - top).abs() < 5.0 * r[4] + 0.02, "{r:?}");
        }
    }

    #[test]
    fn singular_curve_tracks_closed_form() {
        let rows = singular_pair_rows(3, 20_000, 2).unwrap();
        assert!((rows[1][1] + 0.25 * 10f64.ln()).abs() < 1e-12);
        assert!(rows.iter().all(|r| (r[2] - r[1]).abs() < 0.05));
    }

    #[test]
    fn path_layout() {
        let v = scenario_path("example4", 0.5, 10, 3).unwrap();
        assert_eq!(v.len(), 22);
        assert!(v.iter().step_by(2).all(|i| *i == 1.0 || *i == 2.0));
        assert!(scenario_path("nope", 0.5, 10, 3).is_err());
    }
}
