//! Reduced differential filter and higher-order algebraic filter.
//!
//! Both solve `(I + δ^{2m} A^m) ā = a` on the fluctuation modes `1..=N`; `m = 1` is
//! the differential (Helmholtz) filter. The system matrix is factored once as
//! `Rᵀ R` and every application is a pair of triangular solves. The zeroth mode is
//! never filtered.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{RegromError, Result};
use crate::linalg::{matrix_power, symmetrize, symmetry_defect};
use crate::operators::RomOperators;

/// Largest accepted relative asymmetry of the stiffness matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
pub const MAX_ORDER: u32 = 4;

#[derive(Clone, Debug)]
pub struct FilterOperator {
    pub m: u32,
    pub delta: f64,
    pub n: usize,
    system: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl FilterOperator {
    /// Builds the filter from a stiffness matrix that already excludes the zeroth mode.
    pub fn from_stiffness(stiffness: &DMatrix<f64>, delta: f64, m: u32) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&m) {
            return Err(RegromError::Config(format!("filter order {m} not in 1..={MAX_ORDER}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(RegromError::Config(format!("filter radius {delta} must be nonnegative")));
        }
        if !stiffness.is_square() {
            return Err(RegromError::Dimension {
                context: "filter stiffness",
                expected: stiffness.nrows(),
                actual: stiffness.ncols(),
            });
        }
        let defect = symmetry_defect(stiffness);
        if defect > SYMMETRY_TOLERANCE {
            return Err(RegromError::Asymmetric { defect });
        }
        let n = stiffness.nrows();
        let power = matrix_power(&symmetrize(stiffness), m);
        let scale = delta.powi(2 * m as i32);
        let system = symmetrize(&(DMatrix::identity(n, n) + power * scale));
        let factor = Cholesky::new(system.clone())
            .ok_or_else(|| RegromError::Factorization("filter matrix is not positive definite".into()))?;
        Ok(Self { m, delta, n, system, factor })
    }

    /// `I + δ^{2m} A^m`.
    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.system
    }

    /// Upper-triangular `R` with `Rᵀ R` equal to the system matrix.
    pub fn upper_factor(&self) -> DMatrix<f64> {
        self.factor.l().transpose()
    }

    pub fn apply(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        if a.len() != self.n {
            return Err(RegromError::Dimension { context: "filter input", expected: self.n, actual: a.len() });
        }
        Ok(self.factor.solve(a))
    }

    pub fn apply_mut(&self, a: &mut DVector<f64>) {
        debug_assert_eq!(a.len(), self.n);
        self.factor.solve_mut(a);
    }

    /// Filters the fluctuation part of a full `(N+1)` vector; index 0 passes through.
    pub fn apply_full(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.n + 1 {
            return Err(RegromError::Dimension { context: "filter input", expected: self.n + 1, actual: a.len() });
        }
        let mut tail = DVector::from_column_slice(&a[1..]);
        self.apply_mut(&mut tail);
        let mut out = Vec::with_capacity(a.len());
        out.push(a[0]);
        out.extend(tail.iter());
        Ok(out)
    }

    /// The filter as an explicit matrix `(I + δ^{2m} A^m)^{-1}`.
    pub fn application_matrix(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    /// `ā_i` for the unit input `e_i`, for every mode `i`.
    pub fn transfer_diagnostic(&self) -> Vec<f64> {
        let inv = self.application_matrix();
        (0..self.n).map(|i| inv[(i, i)]).collect()
    }
}

/// Filter built from the stiffness block of the reduced operators.
pub fn build_filter(ops: &RomOperators, delta: f64, m: u32) -> Result<FilterOperator> {
    FilterOperator::from_stiffness(&ops.stiffness_fluct(), delta, m)
}

pub fn apply_filter(filter: &FilterOperator, a: &DVector<f64>) -> Result<DVector<f64>> {
    filter.apply(a)
}

pub fn transfer_diagnostic(filter: &FilterOperator) -> Vec<f64> {
    filter.transfer_diagnostic()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn scalar_filter() {
        let k2 = 9.0;
        for m in 1..=4 {
            let f = FilterOperator::from_stiffness(&DMatrix::from_element(1, 1, k2), 0.3, m).unwrap();
            let out = f.apply(&DVector::from_element(1, 2.0)).unwrap();
            let expected = 2.0 / (1.0 + 0.3f64.powi(2 * m as i32) * k2.powi(m as i32));
            assert!((out[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn factor_reconstructs_system() {
        let a = spd(12, 3);
        for m in 1..=4 {
            let f = FilterOperator::from_stiffness(&a, 0.4, m).unwrap();
            let r = f.upper_factor();
            let rec = r.transpose() * &r;
            let rel = (rec - f.system_matrix()).amax() / f.system_matrix().amax();
            assert!(rel < 1e-10);
            for i in 0..12 {
                for j in 0..i {
                    assert_eq!(r[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn asymmetric_stiffness_rejected() {
        let mut a = spd(4, 1);
        a[(0, 1)] += 1e-3;
        assert!(matches!(
            FilterOperator::from_stiffness(&a, 0.1, 1),
            Err(RegromError::Asymmetric { .. })
        ));
    }

    #[test]
    fn order_and_radius_validated() {
        let a = spd(3, 2);
        assert!(FilterOperator::from_stiffness(&a, 0.1, 0).is_err());
        assert!(FilterOperator::from_stiffness(&a, 0.1, 5).is_err());
        assert!(FilterOperator::from_stiffness(&a, -0.1, 1).is_err());
        let f = FilterOperator::from_stiffness(&a, 0.1, 1).unwrap();
        assert!(f.apply(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn zero_input_and_huge_radius() {
        let a = spd(6, 9);
        let f = FilterOperator::from_stiffness(&a, 0.2, 2).unwrap();
        assert_eq!(f.apply(&DVector::zeros(6)).unwrap(), DVector::zeros(6));
        let v = DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin());
        for m in 1..=4 {
            let f = FilterOperator::from_stiffness(&a, 1e6, m).unwrap();
            let out = f.apply(&v).unwrap();
            assert!(out.norm() <= 1e-6 * v.norm());
        }
    }

    #[test]
    fn full_vector_keeps_zeroth_coefficient() {
        let a = spd(3, 4);
        let f = FilterOperator::from_stiffness(&a, 0.5, 1).unwrap();
        let out = f.apply_full(&[1.0, 0.2, -0.3, 0.4]).unwrap();
        assert_eq!(out[0], 1.0);
        let tail = f.apply(&DVector::from_vec(vec![0.2, -0.3, 0.4])).unwrap();
        assert_eq!(&out[1..], tail.as_slice());
    }
}
