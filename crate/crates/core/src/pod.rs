//! Proper orthogonal decomposition by the method of snapshots.
//!
//! The zeroth mode is the time average of the snapshots. The fluctuations
//! `u_k - φ₀` form the Gramian `G_kl = (1/K) (u_k - φ₀, u_l - φ₀)_{L²}`; its leading
//! eigenvectors give the modes `φ_i = Σ_k v_ik (u_k - φ₀) / sqrt(K λ_i)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{RegromError, Result};
use crate::fom::{GridSpec, SnapshotSet};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    pub grid: GridSpec,
    pub zeroth_mode: DVector<f64>,
    /// One mode per column, `n_points × N`.
    pub modes: DMatrix<f64>,
    /// All `K` Gramian eigenvalues, nonincreasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub n_snapshots: usize,
    pub quad_weights: Vec<f64>,
}

impl PodBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    /// Number of eigenvalues above `RANK_CUTOFF · λ₁`.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.eigenvalues)
    }

    /// Zeroth mode followed by the fluctuation modes, `n_points × (N+1)`.
    pub fn with_zeroth(&self) -> DMatrix<f64> {
        let n = self.modes.nrows();
        let mut m = DMatrix::zeros(n, self.n_modes() + 1);
        m.set_column(0, &self.zeroth_mode);
        m.columns_mut(1, self.n_modes()).copy_from(&self.modes);
        m
    }

    /// The first `n` modes (POD bases are nested).
    pub fn truncated(&self, n: usize) -> Result<PodBasis> {
        if n > self.n_modes() {
            return Err(RegromError::Config(format!(
                "cannot truncate {} modes to {n}",
                self.n_modes()
            )));
        }
        Ok(PodBasis { modes: self.modes.columns(0, n).into_owned(), ..self.clone() })
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.quad_weights).map(|((x, y), w)| w * x * y).sum()
    }

    /// Coefficients `(φ_j, u - φ₀)`, j = 1..N.
    pub fn project(&self, field: &[f64]) -> Result<DVector<f64>> {
        if field.len() != self.grid.n_points {
            return Err(RegromError::Dimension {
                context: "projected field",
                expected: self.grid.n_points,
                actual: field.len(),
            });
        }
        let lifted: Vec<f64> = field
            .iter()
            .zip(self.zeroth_mode.iter())
            .zip(&self.quad_weights)
            .map(|((u, z), w)| w * (u - z))
            .collect();
        let lifted = DVector::from_vec(lifted);
        Ok(self.modes.tr_mul(&lifted))
    }

    /// `φ₀ + Σ_j a_j φ_j`.
    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.n_modes() {
            return Err(RegromError::Dimension {
                context: "reconstruction coefficients",
                expected: self.n_modes(),
                actual: coeffs.len(),
            });
        }
        Ok(&self.zeroth_mode + &self.modes * coeffs)
    }

    /// Projected coefficient series of every snapshot, one row per snapshot.
    pub fn project_snapshots(&self, snapshots: &SnapshotSet) -> Result<DMatrix<f64>> {
        if snapshots.grid != self.grid {
            return Err(RegromError::Config("snapshot grid differs from basis grid".into()));
        }
        let mut out = DMatrix::zeros(snapshots.len(), self.n_modes());
        for k in 0..snapshots.len() {
            let a = self.project(&snapshots.row(k))?;
            out.set_row(k, &a.transpose());
        }
        Ok(out)
    }
}

pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().take_while(|&&l| l > RANK_CUTOFF * top).count()
}

pub fn build_pod(snapshots: &SnapshotSet, n_modes: usize) -> Result<PodBasis> {
    let k = snapshots.len();
    if k < 2 {
        return Err(RegromError::Config("POD needs at least 2 snapshots".into()));
    }
    if n_modes == 0 || n_modes > k {
        return Err(RegromError::Config(format!("n_modes {n_modes} not in 1..={k}")));
    }
    let n = snapshots.grid.n_points;
    let w = &snapshots.quad_weights;

    let mean = snapshots.fields.row_mean();
    let zeroth = DVector::from_iterator(n, mean.iter().copied());
    let mut fluct = snapshots.fields.clone();
    for mut row in fluct.row_iter_mut() {
        row -= &mean;
    }
    // Weighted copy so that G = (1/K) F W F^T.
    let mut weighted = fluct.clone();
    for (c, &wc) in w.iter().enumerate() {
        weighted.column_mut(c).scale_mut(wc);
    }
    let gram = (&fluct * weighted.transpose()) / k as f64;
    let gram = (&gram + gram.transpose()) * 0.5;

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let rank = numerical_rank(&eigenvalues);
    if n_modes > rank {
        return Err(RegromError::RankDeficient { requested: n_modes, rank });
    }

    let mut modes = DMatrix::zeros(n, n_modes);
    for (col, &idx) in order.iter().take(n_modes).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let scale = 1.0 / (k as f64 * eigenvalues[col]).sqrt();
        let phi = fluct.tr_mul(&v) * scale;
        modes.set_column(col, &phi);
    }
    reorthonormalize(&mut modes, w);
    for mut col in modes.column_iter_mut() {
        let (imax, _) = col.iter().enumerate().fold((0, 0.0_f64), |(bi, bv), (i, &v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }

    Ok(PodBasis {
        grid: snapshots.grid,
        zeroth_mode: zeroth,
        modes,
        eigenvalues,
        n_snapshots: k,
        quad_weights: w.clone(),
    })
}

/// Two passes of weighted modified Gram–Schmidt. Leading modes move only at
/// round-off level; trailing low-energy modes recover orthonormality lost to the
/// squared conditioning of the Gramian.
fn reorthonormalize(modes: &mut DMatrix<f64>, w: &[f64]) {
    let inner = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y).sum() };
    let mut cols: Vec<Vec<f64>> = modes.column_iter().map(|c| c.iter().copied().collect()).collect();
    for _ in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let cur = &mut rest[0];
            for prev in done.iter() {
                let r = inner(prev, cur);
                cur.iter_mut().zip(prev).for_each(|(c, p)| *c -= r * p);
            }
            let nrm = inner(cur, cur).sqrt();
            cur.iter_mut().for_each(|c| *c /= nrm);
        }
    }
    for (j, c) in cols.iter().enumerate() {
        modes.column_mut(j).copy_from_slice(c);
    }
}
