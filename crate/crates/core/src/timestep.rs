//! Semi-implicit BDFk/EXTk time stepping.
//!
//! For `du/dt = -L u + N(u)` the step solves
//!
//! ```text
//! (γ0/dt I + L) u^{n+1} = -Σ_{q=1..k} (γq/dt) u^{n+1-q} + Σ_{q=1..k} βq N(u^{n+1-q})
//! ```
//!
//! with the standard backward-difference weights γ and extrapolation weights β.
//! Startup uses order 1, then order 2, until three history levels exist.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};
use crate::linalg::DenseSolver;

const BDF: [[f64; 4]; 3] = [
    [1.0, -1.0, 0.0, 0.0],
    [1.5, -2.0, 0.5, 0.0],
    [11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0],
];
const EXT: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [2.0, -1.0, 0.0], [3.0, -3.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BdfExt {
    order: usize,
}

impl BdfExt {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(RegromError::Config(format!("BDF/EXT order {order} not in 1..=3")));
        }
        Ok(Self { order })
    }

    /// Highest order usable with `levels` stored history levels (capped at 3).
    pub fn startup(levels: usize) -> Self {
        Self { order: levels.clamp(1, 3) }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn gamma0(&self) -> f64 {
        BDF[self.order - 1][0]
    }

    /// History weights γ1..γk.
    pub fn bdf_weights(&self) -> &[f64] {
        &BDF[self.order - 1][1..=self.order]
    }

    /// Extrapolation weights β1..βk.
    pub fn ext_weights(&self) -> &[f64] {
        &EXT[self.order - 1][..self.order]
    }

    /// Right-hand side of the implicit solve. `states[0]` and `nonlinear[0]` are the
    /// newest levels; only the first `order` entries are read.
    pub fn explicit_rhs<T>(&self, states: &[&[T]], nonlinear: &[&[T]], dt: f64) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert!(states.len() >= self.order && nonlinear.len() >= self.order);
        let len = states[0].len();
        let mut rhs = vec![T::default(); len];
        for (q, &g) in self.bdf_weights().iter().enumerate() {
            let w = -g / dt;
            for (r, &s) in rhs.iter_mut().zip(states[q]) {
                *r = *r + s * w;
            }
        }
        for (q, &b) in self.ext_weights().iter().enumerate() {
            for (r, &n) in rhs.iter_mut().zip(nonlinear[q]) {
                *r = *r + n * b;
            }
        }
        rhs
    }
}

/// Linear part `L` of `du/dt = -L u + N(u)`.
#[derive(Clone, Debug)]
pub enum LinearOp {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

/// One semi-implicit step. Histories are newest first; the order is the number of
/// levels supplied (capped at 3), so callers ramp 1 → 2 → 3 during startup.
pub fn bdf3ext3_step(
    state_history: &[DVector<f64>],
    linear_op: &LinearOp,
    nonlinear_history: &[DVector<f64>],
    dt: f64,
) -> Result<DVector<f64>> {
    if state_history.is_empty() || nonlinear_history.len() < state_history.len().min(3) {
        return Err(RegromError::Config("insufficient history for a BDF/EXT step".into()));
    }
    let scheme = BdfExt::startup(state_history.len());
    let states: Vec<&[f64]> = state_history.iter().map(|v| v.as_slice()).collect();
    let nonlinear: Vec<&[f64]> = nonlinear_history.iter().map(|v| v.as_slice()).collect();
    let rhs = DVector::from_vec(scheme.explicit_rhs(&states, &nonlinear, dt));
    let shift = scheme.gamma0() / dt;
    match linear_op {
        LinearOp::Diagonal(d) => {
            let mut out = rhs;
            for (o, &di) in out.iter_mut().zip(d.iter()) {
                let pivot = shift + di;
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(RegromError::Singular { condition: f64::INFINITY });
                }
                *o /= pivot;
            }
            Ok(out)
        }
        LinearOp::Dense(m) => {
            let n = m.nrows();
            let h = DMatrix::identity(n, n) * shift + m;
            Ok(DenseSolver::new(h)?.solve(&rhs))
        }
    }
}
