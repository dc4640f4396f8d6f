//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};

/// Largest absolute entry of `m - m^T`, relative to the largest absolute entry of `m`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `m^p` by repeated multiplication; `p = 0` yields the identity.
pub fn matrix_power(m: &DMatrix<f64>, p: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        out = &out * m;
    }
    out
}

/// LU factorization that refuses (numerically) singular matrices.
pub struct DenseSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseSolver {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let lu = m.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !condition.is_finite() || condition > 1e15 {
            return Err(RegromError::Singular { condition });
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        // Non-singularity was checked at construction.
        self.lu.solve(rhs).expect("LU solve on a checked factorization")
    }
}

/// Plain Euclidean dot product of slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
