//! Reduced stiffness, mass and advection operators over modes `0..=N`.
//!
//! With `φ₀` the zeroth mode and `D` the spectral derivative,
//!
//! ```text
//! A_ij = (Dφ_i, Dφ_j)    B_ij = (φ_i, φ_j)    C_ikj = (φ_i, φ_k Dφ_j)
//! ```
//!
//! plus the biharmonic stiffness `(D²φ_i, D²φ_j)` needed by Kuramoto–Sivashinsky and
//! the projected forcing `f_i = (φ_i, f)`.
//! The tensor is dense and stored with index order `(i, k, j)`, `j` fastest.

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};
use crate::fom::{Equation, GridSpec, Spectral};
use crate::pod::PodBasis;

#[derive(Clone, Debug, PartialEq)]
pub struct RomOperators {
    /// Number of fluctuation modes `N`; matrices are `(N+1) × (N+1)`.
    pub n: usize,
    pub equation: Equation,
    pub viscosity: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: Vec<f64>,
    pub biharmonic: DMatrix<f64>,
    pub forcing: DVector<f64>,
}

impl RomOperators {
    fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn c_at(&self, i: usize, k: usize, j: usize) -> f64 {
        let d = self.dim();
        self.c[(i * d + k) * d + j]
    }

    /// Stiffness restricted to the fluctuation modes `1..=N`.
    pub fn stiffness_fluct(&self) -> DMatrix<f64> {
        self.a.view((1, 1), (self.n, self.n)).into_owned()
    }

    /// Linear operator `L` of `da/dt = -C(a, a) - L a` for viscosity `nu`:
    /// `ν A` for Burgers, `ν A_biharmonic - A` for Kuramoto–Sivashinsky.
    pub fn linear_operator(&self, nu: f64) -> DMatrix<f64> {
        match self.equation {
            Equation::Burgers => &self.a * nu,
            Equation::KuramotoSivashinsky => &self.biharmonic * nu - &self.a,
        }
    }

    /// `out_i = Σ_k Σ_j C_ikj adv_k a_j` for `i = 1..=N`, with `adv` and `a` full
    /// `(N+1)` vectors. The `k` loop is outer, the `j` loop inner.
    pub fn advection_into(&self, adv: &[f64], a: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert!(adv.len() == d && a.len() == d && out.len() == self.n);
        for (o, i) in out.iter_mut().zip(1..d) {
            let mut acc = 0.0;
            let block = &self.c[i * d * d..(i + 1) * d * d];
            for (k, &ak) in adv.iter().enumerate() {
                if ak == 0.0 {
                    continue;
                }
                let row = &block[k * d..(k + 1) * d];
                let inner: f64 = row.iter().zip(a).map(|(c, x)| c * x).sum();
                acc += ak * inner;
            }
            *o = acc;
        }
    }

    /// Sub-operators for the first `n` fluctuation modes (POD nesting).
    pub fn truncated(&self, n: usize) -> Result<RomOperators> {
        if n > self.n || n == 0 {
            return Err(RegromError::Config(format!("cannot truncate N={} to {n}", self.n)));
        }
        let d = self.dim();
        let e = n + 1;
        let mut c = Vec::with_capacity(e * e * e);
        for i in 0..e {
            for k in 0..e {
                let start = (i * d + k) * d;
                c.extend_from_slice(&self.c[start..start + e]);
            }
        }
        Ok(RomOperators {
            n,
            equation: self.equation,
            viscosity: self.viscosity,
            a: self.a.view((0, 0), (e, e)).into_owned(),
            b: self.b.view((0, 0), (e, e)).into_owned(),
            c,
            biharmonic: self.biharmonic.view((0, 0), (e, e)).into_owned(),
            forcing: self.forcing.rows(0, e).into_owned(),
        })
    }
}

/// Galerkin right-hand side `da_i/dt = -Σ_kj C_ikj a_k a_j - Σ_j L_ij a_j + f_i`, i = 1..N,
/// for a full coefficient vector with `a₀ = 1`.
pub fn grom_rhs(ops: &RomOperators, a: &DVector<f64>, nu: f64) -> Result<DVector<f64>> {
    if a.len() != ops.n + 1 {
        return Err(RegromError::Dimension { context: "grom_rhs coefficients", expected: ops.n + 1, actual: a.len() });
    }
    if a[0] != 1.0 {
        return Err(RegromError::Config(format!("zeroth coefficient must be 1, got {}", a[0])));
    }
    let mut adv = vec![0.0; ops.n];
    ops.advection_into(a.as_slice(), a.as_slice(), &mut adv);
    let lin = ops.linear_operator(nu) * a;
    Ok(DVector::from_iterator(ops.n, (0..ops.n).map(|i| -adv[i] - lin[i + 1] + ops.forcing[i + 1])))
}

pub fn assemble_operators(
    basis: &PodBasis,
    grid: &GridSpec,
    equation: Equation,
    viscosity: f64,
    forcing_amplitude: f64,
) -> Result<RomOperators> {
    if basis.grid != *grid {
        return Err(RegromError::Config("basis grid differs from the operator grid".into()));
    }
    let sp = Spectral::new(grid);
    let phi = basis.with_zeroth();
    let (npts, d) = phi.shape();
    let mut d1 = DMatrix::zeros(npts, d);
    let mut d2 = DMatrix::zeros(npts, d);
    for j in 0..d {
        let col: Vec<f64> = phi.column(j).iter().copied().collect();
        let uh = sp.forward(&col);
        d1.set_column(j, &DVector::from_vec(sp.inverse(&sp.derivative_hat(&uh, 1))));
        d2.set_column(j, &DVector::from_vec(sp.inverse(&sp.derivative_hat(&uh, 2))));
    }
    let weighted = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for (r, &w) in basis.quad_weights.iter().enumerate() {
            out.row_mut(r).scale_mut(w);
        }
        out
    };
    let a = d1.tr_mul(&weighted(&d1));
    let b = phi.tr_mul(&weighted(&phi));
    let biharmonic = d2.tr_mul(&weighted(&d2));
    let q = 2.0 * std::f64::consts::PI / grid.domain_length;
    let f = DVector::from_iterator(npts, grid.coordinates().iter().map(|&x| forcing_amplitude * (q * x).sin()));
    let forcing = weighted(&phi).tr_mul(&f);

    let mut c = vec![0.0; d * d * d];
    let wphi = weighted(&phi);
    for i in 0..d {
        // P[x, k] = w_x φ_i(x) φ_k(x); C[i, k, j] = Σ_x P[x, k] Dφ_j(x)
        let mut p = phi.clone();
        for (r, mut row) in p.row_iter_mut().enumerate() {
            row.scale_mut(wphi[(r, i)]);
        }
        let block = p.tr_mul(&d1);
        for k in 0..d {
            for j in 0..d {
                c[(i * d + k) * d + j] = block[(k, j)];
            }
        }
    }
    Ok(RomOperators {
        n: d - 1,
        equation,
        viscosity,
        a: (&a + a.transpose()) * 0.5,
        b,
        c,
        biharmonic: (&biharmonic + biharmonic.transpose()) * 0.5,
        forcing,
    })
}
