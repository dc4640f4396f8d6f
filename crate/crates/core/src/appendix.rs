//! Mixed form of the `m = 2` filter.
//!
//! With the auxiliary unknown `w = A ū`, the pair
//!
//! ```text
//! w − A ū = 0
//! δ⁴ A w + ū = u
//! ```
//!
//! eliminates to `(I + δ⁴ A²) ū = u`. The block system is solved here with its own
//! LU factorization so that agreement with [`crate::filter`] is an independent check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{RegromError, Result};
use crate::filter::FilterOperator;
use crate::linalg::{symmetrize, DenseSolver};
use crate::operators::RomOperators;

/// Solves the mixed system for a fluctuation stiffness matrix `a` (`N × N`).
pub fn mixed_form_solve_stiffness(a: &DMatrix<f64>, u: &DVector<f64>, delta: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    if !a.is_square() || u.len() != n {
        return Err(RegromError::Dimension { context: "mixed-form input", expected: n, actual: u.len() });
    }
    let d4 = delta.powi(4);
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).fill_with_identity();
    block.view_mut((0, n), (n, n)).copy_from(&(-a));
    block.view_mut((n, 0), (n, n)).copy_from(&(a * d4));
    block.view_mut((n, n), (n, n)).fill_with_identity();
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(n, n).copy_from(u);
    let sol = DenseSolver::new(block)?.solve(&rhs);
    Ok(sol.rows(n, n).into_owned())
}

pub fn mixed_form_solve(ops: &RomOperators, u: &DVector<f64>, delta: f64) -> Result<DVector<f64>> {
    mixed_form_solve_stiffness(&ops.stiffness_fluct(), u, delta)
}

/// Symmetric positive definite test stiffness with eigenvalues `(2πi)²`, `i = 1..=n`,
/// in a random orthonormal frame.
pub fn random_stiffness(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let lambda = DVector::from_fn(n, |i, _| (2.0 * std::f64::consts::PI * (i + 1) as f64).powi(2));
    symmetrize(&(&q * DMatrix::from_diagonal(&lambda) * q.transpose()))
}

/// Largest relative gap `‖mixed − HOAF‖ / ‖HOAF‖` over `count` random vectors.
pub fn max_identity_gap(stiffness: &DMatrix<f64>, delta: f64, count: usize, seed: u64) -> Result<f64> {
    let filter = FilterOperator::from_stiffness(stiffness, delta, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = stiffness.nrows();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let reference = filter.apply(&u)?;
        let mixed = mixed_form_solve_stiffness(stiffness, &u, delta)?;
        worst = worst.max((mixed - &reference).norm() / reference.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_closed_form() {
        let lambda = 7.0;
        let out = mixed_form_solve_stiffness(&DMatrix::from_element(1, 1, lambda), &DVector::from_element(1, 3.0), 0.4).unwrap();
        assert!((out[0] - 3.0 / (1.0 + 0.4f64.powi(4) * lambda * lambda)).abs() < 1e-14);
    }

    #[test]
    fn zero_radius_is_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let u = DVector::from_vec(vec![1.0, -2.0]);
        assert!((mixed_form_solve_stiffness(&a, &u, 0.0).unwrap() - u).amax() < 1e-15);
    }

    #[test]
    fn random_stiffness_spectrum() {
        let a = random_stiffness(6, 4);
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (i, e) in ev.iter().enumerate() {
            let want = (2.0 * std::f64::consts::PI * (i + 1) as f64).powi(2);
            assert!((e - want).abs() < 1e-9 * want);
        }
    }
}
