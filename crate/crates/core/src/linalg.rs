//! Small dense linear algebra helpers on top of `nalgebra`.
//!
//! Hot loops (simulation steps, product propagation) use the explicit loops
//! here instead of BLAS-style kernels so the floating point summation order is
//! fixed and replays are bit-identical across builds.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrix norm used by bounds and moment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// Largest singular value.
    #[serde(rename = "operator-2")]
    Operator2,
    #[serde(rename = "frobenius")]
    Frobenius,
    /// Induced infinity norm.
    #[serde(rename = "max-row-sum")]
    MaxRowSum,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::Operator2, NormKind::Frobenius, NormKind::MaxRowSum];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Operator2 => "operator-2",
            NormKind::Frobenius => "frobenius",
            NormKind::MaxRowSum => "max-row-sum",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "operator-2" | "2" | "spectral" => Ok(NormKind::Operator2),
            "frobenius" | "fro" => Ok(NormKind::Frobenius),
            "max-row-sum" | "inf" => Ok(NormKind::MaxRowSum),
            other => Err(format!("unknown norm '{other}' (operator-2, frobenius, max-row-sum)")),
        }
    }
}

pub fn norm(m: &Mat, kind: NormKind) -> f64 {
    match kind {
        NormKind::Operator2 => operator_2_norm(m),
        NormKind::Frobenius => m.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::MaxRowSum => (0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

fn operator_2_norm(m: &Mat) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    m.singular_values().max()
}

/// Spectral radius, max |eigenvalue|.
pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    if m.nrows() == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `out = m * v`, row-major explicit loop.
#[inline]
pub fn mat_vec_into(m: &Mat, v: &[f64], out: &mut [f64]) {
    let (rows, cols) = m.shape();
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let mut s = 0.0;
        for j in 0..cols {
            s += m[(i, j)] * v[j];
        }
        *o = s;
    }
}

/// `out = a * b` into a preallocated matrix.
pub fn mat_mul_into(a: &Mat, b: &Mat, out: &mut Mat) {
    let (n, k) = a.shape();
    let m = b.ncols();
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[(i, l)] * b[(l, j)];
            }
            out[(i, j)] = s;
        }
    }
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
