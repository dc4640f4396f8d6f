//! Second-order statistics of reduced and full-order fields.
//!
//! For a field `u = Σ_j a_j φ_j` (with `a₀ = 1`) and a second field `v` derived from
//! `u` by a linear differential operator, the moments
//!
//! ```text
//! ⟨u'u'⟩ = Σ_jk ⟨a_j a_k⟩_t ⟨φ_j φ_k⟩ − (Σ_j ⟨a_j⟩_t ⟨φ_j⟩)²
//! ⟨u'v'⟩ = Σ_jk ⟨a_j a_k⟩_t ⟨φ_j ψ_k⟩ − (Σ_j ⟨a_j⟩_t ⟨φ_j⟩)(Σ_k ⟨a_k⟩_t ⟨ψ_k⟩)
//! ```
//!
//! split into mode tables computed once per basis and a coefficient pass per run.
//! `ψ_k` is the second field of `φ_k`. The averages run over `x` and `t`
//! ([`Axis::Homogeneous`], scalar moments) or over `t` only ([`Axis::Pointwise`],
//! profiles over the grid).
//!
//! On a periodic domain `⟨u' ∂ₓu'⟩_x` vanishes identically, so the default second
//! field for scalar moments is `-∂ₓₓu`.

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};
use crate::fom::{GridSpec, SnapshotSet, Spectral};
use crate::pod::PodBasis;
use crate::rom::RunResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Homogeneous,
    Pointwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecondField {
    /// `∂ₓu`.
    Gradient,
    /// `-∂ₓₓu`.
    NegCurvature,
}

impl SecondField {
    pub fn default_for(axis: Axis) -> Self {
        match axis {
            Axis::Homogeneous => SecondField::NegCurvature,
            Axis::Pointwise => SecondField::Gradient,
        }
    }

    pub fn apply(&self, sp: &Spectral, u: &[f64]) -> Vec<f64> {
        match self {
            SecondField::Gradient => sp.derivative(u, 1),
            SecondField::NegCurvature => sp.derivative(u, 2).into_iter().map(|v| -v).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatsSpec {
    pub axis: Axis,
    pub second_field: SecondField,
}

impl Default for StatsSpec {
    fn default() -> Self {
        Self::new(Axis::Homogeneous)
    }
}

impl StatsSpec {
    pub fn new(axis: Axis) -> Self {
        Self { axis, second_field: SecondField::default_for(axis) }
    }
}

/// Mode tables for the offline stage.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineStats {
    pub spec: StatsSpec,
    /// `⟨φ_j φ_k⟩_x`, `(N+1) × (N+1)`.
    pub mode_pair_means: DMatrix<f64>,
    /// `⟨φ_j⟩_x`.
    pub mode_means: DVector<f64>,
    /// `⟨φ_j ψ_k⟩_x`.
    pub cross_pair_means: DMatrix<f64>,
    /// `⟨ψ_k⟩_x`.
    pub second_means: DVector<f64>,
    /// Modes and their second fields on the grid, for pointwise profiles.
    modes: DMatrix<f64>,
    second: DMatrix<f64>,
}

impl OfflineStats {
    pub fn n_modes(&self) -> usize {
        self.mode_means.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub axis: Axis,
    /// `⟨u'u'⟩`; one entry for scalar moments, one per grid point for profiles.
    pub second_moment: Vec<f64>,
    /// `⟨u'v'⟩`.
    pub cross_moment: Vec<f64>,
    /// False when the source run diverged.
    pub valid: bool,
}

pub fn offline_stats(basis: &PodBasis, spec: StatsSpec) -> OfflineStats {
    let sp = Spectral::new(&basis.grid);
    let phi = basis.with_zeroth();
    let d = phi.ncols();
    let mut psi = DMatrix::zeros(phi.nrows(), d);
    for j in 0..d {
        let col: Vec<f64> = phi.column(j).iter().copied().collect();
        psi.set_column(j, &DVector::from_vec(spec.second_field.apply(&sp, &col)));
    }
    let l = basis.grid.domain_length;
    let mut wphi = phi.clone();
    for (r, &w) in basis.quad_weights.iter().enumerate() {
        wphi.row_mut(r).scale_mut(w / l);
    }
    let pair = phi.tr_mul(&wphi);
    let mode_pair_means = (&pair + pair.transpose()) * 0.5;
    let cross_pair_means = wphi.tr_mul(&psi);
    let ones = DVector::from_element(phi.nrows(), 1.0);
    let mode_means = wphi.tr_mul(&ones);
    let mut wpsi = psi.clone();
    for (r, &w) in basis.quad_weights.iter().enumerate() {
        wpsi.row_mut(r).scale_mut(w / l);
    }
    let second_means = wpsi.tr_mul(&ones);
    OfflineStats {
        spec,
        mode_pair_means,
        mode_means,
        cross_pair_means,
        second_means,
        modes: phi,
        second: psi,
    }
}

/// Statistics of the saved steps of a run past its startup ramp.
pub fn online_stats(offline: &OfflineStats, run: &RunResult) -> Result<StatsReport> {
    let rows = run.statistics_rows();
    let coeffs = run.history.rows(rows.start, rows.len()).into_owned();
    let mut report = coefficient_stats(offline, &coeffs)?;
    report.valid = !run.is_diverged();
    Ok(report)
}

/// Statistics of a coefficient series, one row per time level and `N` columns
/// (the zeroth coefficient is implied).
pub fn coefficient_stats(offline: &OfflineStats, coeffs: &DMatrix<f64>) -> Result<StatsReport> {
    let n = offline.n_modes();
    if coeffs.ncols() != n {
        return Err(RegromError::Dimension { context: "coefficient series", expected: n, actual: coeffs.ncols() });
    }
    let rows = coeffs.nrows();
    if rows < 2 {
        return Err(RegromError::Config(format!("statistics need at least 2 time levels, got {rows}")));
    }
    let mut full = DMatrix::from_element(rows, n + 1, 1.0);
    full.columns_mut(1, n).copy_from(coeffs);
    let second = full.tr_mul(&full) / rows as f64;
    let second = (&second + second.transpose()) * 0.5;
    let mean = DVector::from_iterator(n + 1, full.column_iter().map(|c| c.sum() / rows as f64));

    let (uu, uv) = match offline.spec.axis {
        Axis::Homogeneous => {
            let mu = mean.dot(&offline.mode_means);
            let nu = mean.dot(&offline.second_means);
            let uu = second.component_mul(&offline.mode_pair_means).sum() - mu * mu;
            let uv = second.component_mul(&offline.cross_pair_means).sum() - mu * nu;
            (vec![uu], vec![uv])
        }
        Axis::Pointwise => {
            let pm = &offline.modes * &second;
            let mean_u = &offline.modes * &mean;
            let mean_v = &offline.second * &mean;
            let npts = offline.modes.nrows();
            let uu = (0..npts)
                .map(|x| pm.row(x).dot(&offline.modes.row(x)) - mean_u[x] * mean_u[x])
                .collect();
            let uv = (0..npts)
                .map(|x| pm.row(x).dot(&offline.second.row(x)) - mean_u[x] * mean_v[x])
                .collect();
            (uu, uv)
        }
    };
    Ok(StatsReport { axis: offline.spec.axis, second_moment: uu, cross_moment: uv, valid: true })
}

/// Moments computed directly from full fields, one row per time level.
pub fn field_stats(grid: &GridSpec, weights: &[f64], fields: &DMatrix<f64>, spec: StatsSpec) -> Result<StatsReport> {
    let (rows, npts) = fields.shape();
    if npts != grid.n_points || weights.len() != npts {
        return Err(RegromError::Dimension { context: "field statistics grid", expected: grid.n_points, actual: npts });
    }
    if rows < 2 {
        return Err(RegromError::Config(format!("statistics need at least 2 time levels, got {rows}")));
    }
    let sp = Spectral::new(grid);
    let mut v = DMatrix::zeros(rows, npts);
    for r in 0..rows {
        let u: Vec<f64> = fields.row(r).iter().copied().collect();
        let s = spec.second_field.apply(&sp, &u);
        for (c, x) in s.into_iter().enumerate() {
            v[(r, c)] = x;
        }
    }
    let l = grid.domain_length;
    let (uu, uv) = match spec.axis {
        Axis::Homogeneous => {
            let avg = |m: &DMatrix<f64>| -> f64 {
                let total: f64 = m.row_iter().map(|row| row.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>()).sum();
                total / (l * rows as f64)
            };
            let mu = avg(fields);
            let nu = avg(&v);
            let uf = fields.map(|x| x - mu);
            let vf = v.map(|x| x - nu);
            (vec![avg(&uf.component_mul(&uf))], vec![avg(&uf.component_mul(&vf))])
        }
        Axis::Pointwise => {
            let mut uu = Vec::with_capacity(npts);
            let mut uv = Vec::with_capacity(npts);
            for c in 0..npts {
                let mu = fields.column(c).mean();
                let nu = v.column(c).mean();
                let mut suu = 0.0;
                let mut suv = 0.0;
                for r in 0..rows {
                    let du = fields[(r, c)] - mu;
                    suu += du * du;
                    suv += du * (v[(r, c)] - nu);
                }
                uu.push(suu / rows as f64);
                uv.push(suv / rows as f64);
            }
            (uu, uv)
        }
    };
    Ok(StatsReport { axis: spec.axis, second_moment: uu, cross_moment: uv, valid: true })
}

/// Reconstructs every statistics row of a run on the grid and measures it directly.
pub fn direct_stats(basis: &PodBasis, run: &RunResult, spec: StatsSpec) -> Result<StatsReport> {
    let rows = run.statistics_rows();
    let coeffs = run.history.rows(rows.start, rows.len());
    let fields = coeffs * basis.modes.transpose();
    let fields = DMatrix::from_fn(fields.nrows(), fields.ncols(), |r, c| fields[(r, c)] + basis.zeroth_mode[c]);
    let mut report = field_stats(&basis.grid, &basis.quad_weights, &fields, spec)?;
    report.valid = !run.is_diverged();
    Ok(report)
}

/// Reference moments of a snapshot window.
pub fn snapshot_stats(snapshots: &SnapshotSet, spec: StatsSpec) -> Result<StatsReport> {
    field_stats(&snapshots.grid, &snapshots.quad_weights, &snapshots.fields, spec)
}

/// Statistics of the snapshots projected onto the first `n` modes; `n = 0` keeps the
/// zeroth mode only.
pub fn projection_stats(basis: &PodBasis, snapshots: &SnapshotSet, n: usize, spec: StatsSpec) -> Result<StatsReport> {
    let sub = basis.truncated(n)?;
    let coeffs = sub.project_snapshots(snapshots)?;
    coefficient_stats(&offline_stats(&sub, spec), &coeffs)
}

/// `‖x − y‖₂ / ‖y‖₂`.
pub fn relative_error(rom: &[f64], reference: &[f64]) -> Result<f64> {
    if rom.len() != reference.len() {
        return Err(RegromError::Dimension { context: "moment profile", expected: reference.len(), actual: rom.len() });
    }
    let den = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(RegromError::ZeroReference);
    }
    let num = rom.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// `(eps_uu, eps_uv)`.
pub fn relative_errors(rom: &StatsReport, reference: &StatsReport) -> Result<(f64, f64)> {
    Ok((
        relative_error(&rom.second_moment, &reference.second_moment)?,
        relative_error(&rom.cross_moment, &reference.cross_moment)?,
    ))
}
