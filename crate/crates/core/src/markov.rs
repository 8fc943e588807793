//! Finite-state regime chains: validation, stationary law, path sampling and
//! coupling of two independent copies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

const ROW_SUM_TOL: f64 = 1e-9;

/// Law of the initial regime. States are 0-based internally; configs and CSV
/// output use 1-based labels.
#[derive(Debug, Clone, PartialEq)]
pub enum InitLaw {
    Distribution(Vec<f64>),
    State(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeChain {
    transition: Vec<Vec<f64>>,
    init: InitLaw,
    cumulative: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub regimes: usize,
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Stationary distribution, present when the chain is irreducible.
    pub rho: Option<Vec<f64>>,
    /// Period of the chain, present when the chain is irreducible.
    pub period: Option<usize>,
}

impl ChainDiagnostics {
    pub fn ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBound {
    /// Smallest power with `P^r0` entrywise positive.
    pub r0: usize,
    /// Smallest entry of `P^r0`.
    pub alpha0: f64,
    /// `1 - r * alpha0^2`; `P(tau > n) <= bound^floor(n / r0)`.
    pub bound: f64,
}

impl CouplingBound {
    pub fn survival_bound(&self, n: usize) -> f64 {
        self.bound.powi((n / self.r0) as i32)
    }
}

/// One coupling trial. `censored` is set when the chains had not met by the
/// horizon, in which case `tau` equals the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingSample {
    pub tau: usize,
    pub censored: bool,
}

fn check_stochastic(p: &[Vec<f64>]) -> Result<()> {
    let r = p.len();
    if r == 0 {
        return Err(Error::NonStochasticMatrix("empty transition matrix".into()));
    }
    for (i, row) in p.iter().enumerate() {
        if row.len() != r {
            return Err(Error::NonStochasticMatrix(format!(
                "row {} has {} entries, expected {r}",
                i + 1,
                row.len()
            )));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonStochasticMatrix(format!("row {} has non-finite entry {x}", i + 1)));
        }
        if let Some(x) = row.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::NonStochasticMatrix(format!("row {} has entry {x} outside [0, 1]", i + 1)));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NonStochasticMatrix(format!("row {} sums to {s}", i + 1)));
        }
    }
    Ok(())
}

fn check_init(init: &InitLaw, r: usize) -> Result<()> {
    match init {
        InitLaw::State(s) if *s >= r => {
            Err(Error::InvalidModel(format!("initial state {} out of range 1..={r}", s + 1)))
        }
        InitLaw::Distribution(d) => {
            if d.len() != r {
                return Err(Error::InvalidModel(format!(
                    "initial distribution has length {}, expected {r}",
                    d.len()
                )));
            }
            if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidModel("initial distribution has negative entries".into()));
            }
            let s: f64 = d.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!("initial distribution sums to {s}")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

#[inline]
fn draw(cum: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let total = cum[cum.len() - 1];
    let u = u * total;
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl RegimeChain {
    pub fn new(transition: Vec<Vec<f64>>, init: InitLaw) -> Result<Self> {
        check_stochastic(&transition)?;
        check_init(&init, transition.len())?;
        let cumulative = transition.iter().map(|r| cumulative(r)).collect();
        Ok(Self { transition, init, cumulative })
    }

    /// Chain started from its own stationary law.
    pub fn stationary_start(transition: Vec<Vec<f64>>) -> Result<Self> {
        let d = validate_chain(&transition, &InitLaw::State(0))?;
        let rho = d.rho.ok_or_else(|| Error::NotErgodic("reducible chain has no unique stationary law".into()))?;
        Self::new(transition, InitLaw::Distribution(rho))
    }

    /// Single-regime chain.
    pub fn trivial() -> Self {
        Self::new(vec![vec![1.0]], InitLaw::State(0)).expect("1x1 identity chain is valid")
    }

    pub fn regimes(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.transition[i][j]
    }

    pub fn init(&self) -> &InitLaw {
        &self.init
    }

    pub fn with_init(&self, init: InitLaw) -> Result<Self> {
        check_init(&init, self.regimes())?;
        Ok(Self { init, ..self.clone() })
    }

    /// Probability vector of the initial law.
    pub fn init_distribution(&self) -> Vec<f64> {
        match &self.init {
            InitLaw::Distribution(d) => d.clone(),
            InitLaw::State(s) => {
                let mut d = vec![0.0; self.regimes()];
                d[*s] = 1.0;
                d
            }
        }
    }

    pub fn diagnostics(&self) -> ChainDiagnostics {
        diagnose(&self.transition)
    }

    /// Stationary law, or `NotErgodic` for a reducible chain.
    pub fn rho(&self) -> Result<Vec<f64>> {
        stationary_distribution(&self.transition)
            .ok_or_else(|| Error::NotErgodic("reducible chain has no unique stationary law".into()))
    }

    pub fn require_ergodic(&self) -> Result<ChainDiagnostics> {
        let d = self.diagnostics();
        if !d.irreducible {
            return Err(Error::NotErgodic("chain is reducible".into()));
        }
        if !d.aperiodic {
            return Err(Error::NotErgodic(format!("chain has period {}", d.period.unwrap_or(0))));
        }
        Ok(d)
    }

    #[inline]
    pub fn step(&self, from: usize, rng: &mut StreamRng) -> usize {
        if self.regimes() == 1 {
            return 0;
        }
        draw(&self.cumulative[from], rng)
    }

    pub fn draw_from(&self, law: &[f64], rng: &mut StreamRng) -> usize {
        if law.len() == 1 {
            return 0;
        }
        draw(&cumulative(law), rng)
    }

    pub fn draw_initial(&self, rng: &mut StreamRng) -> usize {
        match &self.init {
            InitLaw::State(s) => *s,
            InitLaw::Distribution(d) => self.draw_from(d, rng),
        }
    }

    /// Path `I_0..=I_n` with `I_0` drawn from `start` and then run forward.
    pub fn sample_path_from(&self, start: usize, n: usize, rng: &mut StreamRng) -> Vec<usize> {
        let mut path = Vec::with_capacity(n + 1);
        let mut s = start;
        path.push(s);
        for _ in 0..n {
            s = self.step(s, rng);
            path.push(s);
        }
        path
    }

    /// Regime path of length `n + 1` from the chain's initial law.
    pub fn sample_path(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng::stream(seed, 0);
        let start = self.draw_initial(&mut rng);
        self.sample_path_from(start, n, &mut rng)
    }

    /// `P^k` as a dense matrix.
    pub fn power(&self, k: usize) -> DMatrix<f64> {
        let p = self.matrix();
        let mut out = DMatrix::identity(self.regimes(), self.regimes());
        for _ in 0..k {
            out = &out * &p;
        }
        out
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let r = self.regimes();
        DMatrix::from_fn(r, r, |i, j| self.transition[i][j])
    }
}

/// Validates `P` and the initial law and classifies the chain.
pub fn validate_chain(p: &[Vec<f64>], init: &InitLaw) -> Result<ChainDiagnostics> {
    check_stochastic(p)?;
    check_init(init, p.len())?;
    Ok(diagnose(p))
}

fn diagnose(p: &[Vec<f64>]) -> ChainDiagnostics {
    let r = p.len();
    let irreducible = strongly_connected(p);
    let (aperiodic, period) = if irreducible {
        (primitive_within_wielandt(p), Some(period_of(p)))
    } else {
        (false, None)
    };
    let rho = if irreducible { stationary_distribution(p) } else { None };
    ChainDiagnostics { regimes: r, irreducible, aperiodic, rho, period }
}

fn reachable(adj: &[Vec<bool>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for (v, &e) in adj[u].iter().enumerate() {
            if e && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let r = p.len();
    let adj: Vec<Vec<bool>> = p.iter().map(|row| row.iter().map(|&x| x > 0.0).collect()).collect();
    let rev: Vec<Vec<bool>> = (0..r).map(|i| (0..r).map(|j| adj[j][i]).collect()).collect();
    reachable(&adj, 0).into_iter().all(|b| b) && reachable(&rev, 0).into_iter().all(|b| b)
}

/// For an irreducible chain: some `P^k`, `k <= (r-1)^2 + 1`, is entrywise positive.
fn primitive_within_wielandt(p: &[Vec<f64>]) -> bool {
    first_positive_power(p).is_some()
}

fn first_positive_power(p: &[Vec<f64>]) -> Option<usize> {
    let r = p.len();
    let adj: Vec<Vec<bool>> = p.iter().map(|row| row.iter().map(|&x| x > 0.0).collect()).collect();
    let mut cur = adj.clone();
    let limit = (r - 1) * (r - 1) + 1;
    for k in 1..=limit {
        if cur.iter().all(|row| row.iter().all(|&b| b)) {
            return Some(k);
        }
        let mut next = vec![vec![false; r]; r];
        for i in 0..r {
            for l in 0..r {
                if cur[i][l] {
                    for j in 0..r {
                        next[i][j] |= adj[l][j];
                    }
                }
            }
        }
        cur = next;
    }
    None
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period via BFS levels: gcd over edges `u -> v` of `level(u) + 1 - level(v)`.
fn period_of(p: &[Vec<f64>]) -> usize {
    let r = p.len();
    let mut level = vec![usize::MAX; r];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..r {
            if p[u][v] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..r {
        for v in 0..r {
            if p[u][v] > 0.0 && level[u] != usize::MAX && level[v] != usize::MAX {
                let d = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, d);
            }
        }
    }
    g.max(1)
}

/// Stationary law by a direct solve of `(P^T - I) rho = 0`, `sum(rho) = 1`,
/// falling back to power iteration on the lazy chain. `None` if reducible.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Option<Vec<f64>> {
    if !strongly_connected(p) {
        return None;
    }
    let r = p.len();
    if r == 1 {
        return Some(vec![1.0]);
    }
    let mut a = DMatrix::from_fn(r, r, |i, j| p[j][i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..r {
        a[(r - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(r);
    b[r - 1] = 1.0;
    let solved = a.lu().solve(&b).map(|x| x.iter().copied().collect::<Vec<f64>>());
    if let Some(rho) = solved {
        if stationary_residual(p, &rho) < 1e-12 && rho.iter().all(|&x| x >= -1e-14) {
            return Some(rho.into_iter().map(|x| x.max(0.0)).collect());
        }
    }
    Some(power_iteration(p))
}

fn power_iteration(p: &[Vec<f64>]) -> Vec<f64> {
    let r = p.len();
    let mut rho = vec![1.0 / r as f64; r];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; r];
        for i in 0..r {
            for j in 0..r {
                // lazy chain (P + I) / 2 shares rho and is aperiodic
                next[j] += rho[i] * 0.5 * (p[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        rho = next;
        if stationary_residual(p, &rho) < 1e-13 {
            break;
        }
    }
    rho
}

/// `max_j |(rho P)_j - rho_j|`.
pub fn stationary_residual(p: &[Vec<f64>], rho: &[f64]) -> f64 {
    let r = p.len();
    (0..r)
        .map(|j| ((0..r).map(|i| rho[i] * p[i][j]).sum::<f64>() - rho[j]).abs())
        .fold(0.0, f64::max)
}

/// First meeting times of two independent copies started in `i` and `j`.
/// Trial `k` uses sub-stream `k` of `seed`.
pub fn coupling_time_samples(
    chain: &RegimeChain,
    i: usize,
    j: usize,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<CouplingSample>> {
    chain.require_ergodic()?;
    let r = chain.regimes();
    if i >= r || j >= r {
        return Err(Error::InvalidArgument(format!("start states must lie in 1..={r}")));
    }
    Ok(rng::map_indexed(trials, |t| {
        let mut rng = rng::stream(seed, t as u64);
        let (mut a, mut b) = (i, j);
        let mut k = 0;
        while a != b && k < horizon {
            a = chain.step(a, &mut rng);
            b = chain.step(b, &mut rng);
            k += 1;
        }
        CouplingSample { tau: k, censored: a != b }
    }))
}

/// Empirical survival `P(tau > n)` for `n = 0..=horizon` with binomial
/// standard errors. Censored samples count as surviving through the horizon.
pub fn survival_curve(samples: &[CouplingSample], horizon: usize) -> Vec<(f64, f64)> {
    let m = samples.len() as f64;
    (0..=horizon)
        .map(|n| {
            let alive = samples.iter().filter(|s| s.censored || s.tau > n).count() as f64;
            let s = alive / m;
            (s, (s * (1.0 - s) / m).sqrt())
        })
        .collect()
}

/// Tail bound for the coupling time built from the first entrywise positive
/// power of `P`.
pub fn coupling_tail_bound(chain: &RegimeChain) -> Result<CouplingBound> {
    chain.require_ergodic()?;
    let r0 = first_positive_power(chain.transition())
        .ok_or_else(|| Error::NotErgodic("no entrywise positive power".into()))?;
    let pk = chain.power(r0);
    let alpha0 = pk.iter().copied().fold(f64::INFINITY, f64::min);
    let r = chain.regimes() as f64;
    let bound = (1.0 - r * alpha0 * alpha0).max(0.0);
    Ok(CouplingBound { r0, alpha0, bound })
}
