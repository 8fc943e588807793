//! Exact exponents for special coefficient structures and the
//! submultiplicative upper bound.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, NormKind};
use crate::markov::RegimeChain;
use crate::model::SwitchingModel;
use crate::serde_float;

const TRIANGULAR_TOL: f64 = 1e-14;
const COMMUTATOR_TOL: f64 = 1e-10;

/// `sum_i rho_i log x_i`, skipping zero-weight regimes so `0 * log 0` is 0.
fn weighted_log(rho: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    rho.iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, x)| w * x.abs().ln())
        .sum()
}

fn sort_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `sum_i rho_i log ||B_i||`. Negative values certify a negative top exponent.
pub fn cb_bound(model: &SwitchingModel, rho: &[f64], norm: NormKind) -> f64 {
    weighted_log(rho, model.b.iter().map(|b| linalg::norm(b, norm)))
}

/// Exponents of upper triangular coefficients: `sum_i rho_i log |(B_i)_jj|`,
/// sorted non-increasing.
pub fn closed_form_triangular(model: &SwitchingModel, rho: &[f64]) -> Result<Vec<f64>> {
    let p = model.dim;
    for b in &model.b {
        for i in 0..p {
            for j in 0..i {
                if b[(i, j)].abs() >= TRIANGULAR_TOL {
                    return Err(Error::NotTriangular);
                }
            }
        }
    }
    Ok(sort_desc((0..p).map(|j| weighted_log(rho, model.b.iter().map(|b| b[(j, j)]))).collect()))
}

fn commute(a: &Mat, b: &Mat) -> bool {
    let scale = 1.0_f64.max(linalg::max_abs(a) * linalg::max_abs(b));
    linalg::max_abs(&(a * b - b * a)) < COMMUTATOR_TOL * scale
}

/// Exponents of pairwise commuting, simultaneously diagonalizable
/// coefficients. Eigenvalues are paired through a common eigenbasis.
pub fn closed_form_commuting(model: &SwitchingModel, rho: &[f64]) -> Result<Vec<f64>> {
    let r = model.regimes();
    for i in 0..r {
        for j in i + 1..r {
            if !commute(&model.b[i], &model.b[j]) {
                return Err(Error::NotCommuting);
            }
        }
    }
    let eig = common_eigenvalues(&model.b)?;
    let p = model.dim;
    Ok(sort_desc((0..p).map(|k| weighted_log(rho, eig.iter().map(|e| e[k].norm()))).collect()))
}

/// `eig[i][k]` is the eigenvalue of `B_i` on the `k`-th common eigenvector.
///
/// The basis comes from a generic real combination `C = sum t_i B_i`: on each
/// eigenspace of `C` every `B_i` acts as a scalar.
fn common_eigenvalues(bs: &[Mat]) -> Result<Vec<Vec<Complex<f64>>>> {
    let p = bs[0].nrows();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut c = Mat::zeros(p, p);
    for b in bs {
        let t: f64 = rng.random_range(0.5..1.5);
        c += b * t;
    }
    let scale = 1.0_f64.max(linalg::max_abs(&c));
    let tol = 1e-8 * scale;
    let mut eigs = linalg::eigenvalues(&c);
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for z in eigs {
        match clusters.last_mut() {
            Some((c0, m)) if (*c0 - z).norm() < tol => *m += 1,
            _ => clusters.push((z, 1)),
        }
    }
    let cc: DMatrix<Complex<f64>> = c.map(|x| Complex::new(x, 0.0));
    let bcs: Vec<DMatrix<Complex<f64>>> = bs.iter().map(|b| b.map(|x| Complex::new(x, 0.0))).collect();
    let mut eig = vec![Vec::with_capacity(p); bs.len()];
    for (mu, mult) in clusters {
        let shifted = &cc - DMatrix::<Complex<f64>>::identity(p, p) * mu;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for &k in order.iter().take(mult) {
            if svd.singular_values[k] > 1e-6 * scale {
                return Err(Error::NotSimultaneouslyDiagonalizable);
            }
            let v: DVector<Complex<f64>> = vt.row(k).adjoint();
            let vv = v.dotc(&v);
            for (i, b) in bcs.iter().enumerate() {
                let bv = b * &v;
                let delta = v.dotc(&bv) / vv;
                let resid = (&bv - &v * delta).norm();
                if resid > 1e-7 * (1.0 + b.norm()) * vv.re.sqrt() {
                    return Err(Error::NotSimultaneouslyDiagonalizable);
                }
                eig[i].push(delta);
            }
        }
    }
    Ok(eig)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PincusCase {
    /// Invertible second matrix, series in the (1,1) entries of its powers.
    Series,
    /// Both matrices singular, three-term closed form.
    BothSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PincusResult {
    #[serde(with = "serde_float")]
    pub lambda: f64,
    pub case: PincusCase,
    /// Series terms evaluated (0 for the singular case).
    pub terms_used: usize,
}

/// A rank-one `B_1` brought to `diag(delta, 0)` with `B_2` expressed in the
/// same basis: `b1 = Q^-1 B_1 Q`, `b2 = Q^-1 B_2 Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPairBasis {
    pub delta: f64,
    pub q: Mat,
    pub b1: Mat,
    pub b2: Mat,
}

/// Change of basis that puts a singular, non-nilpotent 2x2 `b1` into the form
/// `diag(delta, 0)`.
pub fn canonicalize_singular_pair(b1: &Mat, b2: &Mat) -> Result<SingularPairBasis> {
    if b1.shape() != (2, 2) || b2.shape() != (2, 2) {
        return Err(Error::NonCanonicalB1("both matrices must be 2x2".into()));
    }
    let scale = linalg::max_abs(b1);
    if scale == 0.0 {
        return Err(Error::NonCanonicalB1("first matrix is zero".into()));
    }
    if b1.determinant().abs() > 1e-12 * scale * scale {
        return Err(Error::NonCanonicalB1("first matrix is not singular".into()));
    }
    let delta = b1.trace();
    if delta.abs() <= 1e-14 * scale {
        return Err(Error::NonCanonicalB1("first matrix is nilpotent".into()));
    }
    // range is spanned by any nonzero column; kernel is orthogonal to a nonzero row
    let col = if b1.column(0).norm() >= b1.column(1).norm() { b1.column(0) } else { b1.column(1) };
    let row = if b1.row(0).norm() >= b1.row(1).norm() { b1.row(0) } else { b1.row(1) };
    let q = Mat::from_row_slice(2, 2, &[col[0], -row[1], col[1], row[0]]);
    let qi = q.clone().try_inverse().ok_or_else(|| Error::NonCanonicalB1("degenerate basis".into()))?;
    let mut c1 = &qi * b1 * &q;
    // clean roundoff in the structural zeros
    c1[(0, 1)] = 0.0;
    c1[(1, 0)] = 0.0;
    c1[(1, 1)] = 0.0;
    let c2 = &qi * b2 * &q;
    Ok(SingularPairBasis { delta: c1[(0, 0)], q, b1: c1, b2: c2 })
}

/// Exponent of the two-regime product with `B_1 = diag(delta, 0)`.
///
/// Invertible `B_2`:
/// `lambda = p21/(p21+p12) log|delta| + sum_{i>=1} p1 p21 p12 p22^(i-1) log|b11(i)|`
/// with `b11(i)` the (1,1) entry of `B_2^i`. `p1` is taken as given; the
/// series equals the exponent of the stationary-start product when
/// `p1 = p21 / (p12 + p21)`.
///
/// Singular `B_2` with nonzero trace:
/// `lambda = p21/(p12+p21) log|delta| + p12/(p12+p21) log|tr B_2|
///         + p12 p21/(p12+p21) log|b11 / tr B_2|`.
pub fn pincus_singular(b1: &Mat, b2: &Mat, chain: &RegimeChain, p1: f64, terms: usize) -> Result<PincusResult> {
    if chain.regimes() != 2 || b1.shape() != (2, 2) || b2.shape() != (2, 2) {
        return Err(Error::InvalidArgument("needs two regimes and 2x2 matrices".into()));
    }
    let delta = b1[(0, 0)];
    let tol = TRIANGULAR_TOL * 1.0_f64.max(delta.abs());
    if delta == 0.0 || b1[(0, 1)].abs() > tol || b1[(1, 0)].abs() > tol || b1[(1, 1)].abs() > tol {
        return Err(Error::NonCanonicalB1(format!("{:?}", linalg::to_rows(b1))));
    }
    let (p12, p21, p22) = (chain.p(0, 1), chain.p(1, 0), chain.p(1, 1));
    if p12 + p21 == 0.0 {
        return Err(Error::NotErgodic("regimes never switch".into()));
    }
    let w1 = p21 / (p12 + p21);
    let w2 = p12 / (p12 + p21);
    let cross = p12 * p21 / (p12 + p21);
    let scale = linalg::max_abs(b2);
    if b2.determinant().abs() <= 1e-12 * scale * scale {
        let tr = b2.trace();
        if tr.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::ZeroTrace);
        }
        let mut lambda = w1 * delta.abs().ln() + w2 * tr.abs().ln();
        if cross > 0.0 {
            lambda += cross * (b2[(0, 0)] / tr).abs().ln();
        }
        return Ok(PincusResult { lambda, case: PincusCase::BothSingular, terms_used: 0 });
    }
    let mut lambda = w1 * delta.abs().ln();
    let base = p1 * p21 * p12;
    let mut power = b2.clone();
    let mut log_scale = 0.0;
    let mut used = 0;
    let mut next = Mat::zeros(2, 2);
    for i in 1..=terms.max(1) {
        if i > 1 {
            linalg::mat_mul_into(&power, b2, &mut next);
            std::mem::swap(&mut power, &mut next);
        }
        let s = linalg::max_abs(&power);
        power /= s;
        log_scale += s.ln();
        let weight = base * p22.powi(i as i32 - 1);
        let log_b11 = power[(0, 0)].abs().ln() + log_scale;
        used = i;
        if weight == 0.0 {
            break;
        }
        lambda += weight * log_b11;
        if weight * (1.0 + log_b11.abs()) < 1e-14 || lambda == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(PincusResult { lambda, case: PincusCase::Series, terms_used: used })
}
