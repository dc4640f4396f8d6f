//! Desk-scale full-order model: 1D periodic viscous Burgers and Kuramoto–Sivashinsky,
//! Fourier pseudo-spectral in space, BDF3/EXT3 in time.
//!
//! Both equations are written as `u_t = -(u²/2)_x + Lu + f(x)` with
//!
//! * Burgers: `L = ν ∂xx`
//! * Kuramoto–Sivashinsky: `L = -∂xx - ν ∂xxxx`
//!
//! and `f(x) = forcing_amplitude · sin(2πx/L)`. The linear part is implicit, the
//! advection and forcing are extrapolated, and products are dealiased by the 2/3 rule.
//!
//! Stability: the extrapolated advection requires roughly
//! `dt · max|u| · k_cut < 0.5`, with `k_cut` the largest retained angular
//! wavenumber. [`run_fom`] rejects initial states violating this bound and reports
//! the largest value observed during the run.

pub mod spectral;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{RegromError, Result};
use crate::timestep::BdfExt;
pub use spectral::Spectral;

/// Advective CFL limit enforced on the initial state.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    pub domain_length: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, domain_length: f64) -> Result<Self> {
        if n_points < 16 || !n_points.is_multiple_of(2) {
            return Err(RegromError::Config(format!(
                "grid needs an even number of points >= 16, got {n_points}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(RegromError::Config(format!("domain length {domain_length} must be positive")));
        }
        Ok(Self { n_points, domain_length })
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.n_points as f64
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points).map(|i| i as f64 * h).collect()
    }

    /// Uniform trapezoidal (= rectangle, periodic) L² weights; they sum to `L`.
    pub fn quad_weights(&self) -> Vec<f64> {
        vec![self.spacing(); self.n_points]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    Burgers,
    KuramotoSivashinsky,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Burgers => "burgers",
            Equation::KuramotoSivashinsky => "kuramoto_sivashinsky",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burgers" => Ok(Equation::Burgers),
            "kuramoto_sivashinsky" | "ks" => Ok(Equation::KuramotoSivashinsky),
            other => Err(RegromError::Config(format!("unknown equation '{other}'"))),
        }
    }

    pub fn code(&self) -> u64 {
        match self {
            Equation::Burgers => 0,
            Equation::KuramotoSivashinsky => 1,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(Equation::Burgers),
            1 => Ok(Equation::KuramotoSivashinsky),
            c => Err(RegromError::Format(format!("unknown equation code {c}"))),
        }
    }

    /// Fourier symbol of the linear operator `L` at angular wavenumber `k`.
    pub fn linear_symbol(&self, k: f64, viscosity: f64) -> f64 {
        match self {
            Equation::Burgers => -viscosity * k * k,
            Equation::KuramotoSivashinsky => k * k - viscosity * k.powi(4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Seeded uniform noise on Fourier modes `1..=n/8`: each cosine and sine
    /// amplitude is drawn from `U(-amplitude, amplitude)`.
    Noise { amplitude: f64 },
    /// `amplitude · sin(2π mode x / L)`.
    Sine { mode: usize, amplitude: f64 },
    Field(Vec<f64>),
}

impl InitialCondition {
    pub fn describe(&self, n_points: usize) -> String {
        match self {
            InitialCondition::Noise { amplitude } => format!(
                "uniform noise U(-{amplitude}, {amplitude}) on Fourier modes 1..={}",
                n_points / 8
            ),
            InitialCondition::Sine { mode, amplitude } => format!("{amplitude}·sin(2π·{mode}x/L)"),
            InitialCondition::Field(_) => "user field".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FomConfig {
    pub equation: Equation,
    pub viscosity: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_stride: usize,
    pub seed: u64,
    pub forcing_amplitude: f64,
    /// Fraction of the steps discarded before snapshots are recorded.
    pub spinup_fraction: f64,
    pub initial: InitialCondition,
}

impl Default for FomConfig {
    fn default() -> Self {
        Self {
            equation: Equation::KuramotoSivashinsky,
            viscosity: 1.0,
            dt: 0.01,
            n_steps: 10_000,
            snapshot_stride: 10,
            seed: 0,
            forcing_amplitude: 0.0,
            spinup_fraction: 0.2,
            initial: InitialCondition::Noise { amplitude: 0.1 },
        }
    }
}

impl FomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RegromError::Config(m));
        if !(self.viscosity > 0.0) {
            return bad(format!("viscosity {} must be positive", self.viscosity));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt {} must be positive", self.dt));
        }
        if self.n_steps == 0 || self.snapshot_stride == 0 {
            return bad("n_steps and snapshot_stride must be positive".into());
        }
        if !self.n_steps.is_multiple_of(self.snapshot_stride) {
            return bad(format!(
                "snapshot_stride {} does not divide n_steps {}",
                self.snapshot_stride, self.n_steps
            ));
        }
        if !(self.forcing_amplitude >= 0.0) {
            return bad("forcing_amplitude must be nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.spinup_fraction) {
            return bad(format!("spinup_fraction {} not in [0, 1)", self.spinup_fraction));
        }
        Ok(())
    }

    pub fn spinup_steps(&self) -> usize {
        (self.spinup_fraction * self.n_steps as f64).floor() as usize
    }
}

/// Ordered field samples. Row `k` of `fields` is the state at `times[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub fields: DMatrix<f64>,
    pub quad_weights: Vec<f64>,
}

impl SnapshotSet {
    pub fn new(grid: GridSpec, times: Vec<f64>, fields: DMatrix<f64>, quad_weights: Vec<f64>) -> Result<Self> {
        if fields.nrows() != times.len() {
            return Err(RegromError::Dimension {
                context: "snapshot rows vs times",
                expected: times.len(),
                actual: fields.nrows(),
            });
        }
        if fields.ncols() != grid.n_points || quad_weights.len() != grid.n_points {
            return Err(RegromError::Dimension {
                context: "snapshot columns vs grid",
                expected: grid.n_points,
                actual: fields.ncols(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RegromError::Config("snapshot times must be strictly increasing".into()));
        }
        if quad_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(RegromError::Config("quadrature weights must be positive".into()));
        }
        Ok(Self { grid, times, fields, quad_weights })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.fields.row(k).iter().copied().collect()
    }

    /// Snapshots `range.start..range.end` as a new set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(RegromError::Config(format!(
                "snapshot range {range:?} outside 0..{}",
                self.len()
            )));
        }
        let fields = self.fields.rows(range.start, range.end - range.start).into_owned();
        Self::new(self.grid, self.times[range].to_vec(), fields, self.quad_weights.clone())
    }
}

#[derive(Clone, Debug)]
pub struct FomRun {
    pub snapshots: SnapshotSet,
    pub initial_condition: String,
    pub spinup_steps: usize,
    pub max_cfl: f64,
}

pub fn run_fom(config: &FomConfig, grid: &GridSpec) -> Result<SnapshotSet> {
    run_fom_detailed(config, grid).map(|r| r.snapshots)
}

pub fn initial_field(config: &FomConfig, grid: &GridSpec) -> Result<Vec<f64>> {
    let n = grid.n_points;
    let x = grid.coordinates();
    let base = 2.0 * std::f64::consts::PI / grid.domain_length;
    match &config.initial {
        InitialCondition::Noise { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut u = vec![0.0; n];
            for k in 1..=n / 8 {
                let a: f64 = rng.random_range(-1.0..=1.0) * amplitude;
                let b: f64 = rng.random_range(-1.0..=1.0) * amplitude;
                let q = base * k as f64;
                for (ui, &xi) in u.iter_mut().zip(&x) {
                    *ui += a * (q * xi).cos() + b * (q * xi).sin();
                }
            }
            Ok(u)
        }
        InitialCondition::Sine { mode, amplitude } => {
            let q = base * *mode as f64;
            Ok(x.iter().map(|&xi| amplitude * (q * xi).sin()).collect())
        }
        InitialCondition::Field(f) => {
            if f.len() != n {
                return Err(RegromError::Dimension {
                    context: "initial field",
                    expected: n,
                    actual: f.len(),
                });
            }
            Ok(f.clone())
        }
    }
}

/// Steps the full-order model and records every `snapshot_stride`-th state after the
/// spin-up period.
pub fn run_fom_detailed(config: &FomConfig, grid: &GridSpec) -> Result<FomRun> {
    config.validate()?;
    let sp = Spectral::new(grid);
    let n = grid.n_points;
    let u0 = initial_field(config, grid)?;
    let k_cut = sp.wavenumbers()[Spectral::dealias_cutoff(n)];
    let cfl = |u: &[f64]| config.dt * k_cut * u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cfl0 = cfl(&u0);
    if cfl0 > CFL_LIMIT {
        return Err(RegromError::Config(format!(
            "dt {} violates the advective bound: CFL {cfl0:.3} > {CFL_LIMIT}",
            config.dt
        )));
    }

    let symbol: Vec<f64> = sp
        .wavenumbers()
        .iter()
        .map(|&k| config.equation.linear_symbol(k, config.viscosity))
        .collect();
    let forcing_hat = if config.forcing_amplitude > 0.0 {
        let q = 2.0 * std::f64::consts::PI / grid.domain_length;
        let f: Vec<f64> = grid
            .coordinates()
            .iter()
            .map(|&x| config.forcing_amplitude * (q * x).sin())
            .collect();
        Some(sp.forward(&f))
    } else {
        None
    };
    let explicit = |uh: &[Complex64]| {
        let mut nl = sp.advection_hat(uh);
        if let Some(f) = &forcing_hat {
            for (a, b) in nl.iter_mut().zip(f) {
                *a += *b;
            }
        }
        nl
    };

    let mut states: Vec<Vec<Complex64>> = vec![sp.forward(&u0)];
    let mut nonlinear: Vec<Vec<Complex64>> = vec![explicit(&states[0])];
    let spinup = config.spinup_steps();
    let mut times = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut max_cfl = cfl0;

    for step in 1..=config.n_steps {
        let scheme = BdfExt::startup(states.len());
        let s: Vec<&[Complex64]> = states.iter().map(|v| v.as_slice()).collect();
        let nl: Vec<&[Complex64]> = nonlinear.iter().map(|v| v.as_slice()).collect();
        let mut next = scheme.explicit_rhs(&s, &nl, config.dt);
        let shift = scheme.gamma0() / config.dt;
        for (c, &l) in next.iter_mut().zip(&symbol) {
            *c /= shift - l;
        }
        sp.make_real(&mut next);
        if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(RegromError::BlowUp { step });
        }
        let record = step > spinup && step % config.snapshot_stride == 0;
        if record {
            let u = sp.inverse(&next);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(RegromError::BlowUp { step });
            }
            max_cfl = max_cfl.max(cfl(&u));
            times.push(step as f64 * config.dt);
            rows.push(u);
        }
        let nl_next = explicit(&next);
        states.insert(0, next);
        nonlinear.insert(0, nl_next);
        states.truncate(3);
        nonlinear.truncate(3);
    }

    if rows.is_empty() {
        return Err(RegromError::Config("no snapshots recorded after spin-up".into()));
    }
    let fields = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let snapshots = SnapshotSet::new(*grid, times, fields, grid.quad_weights())?;
    Ok(FomRun {
        snapshots,
        initial_condition: config.initial.describe(n),
        spinup_steps: spinup,
        max_cfl,
    })
}

/// Discrete L² energy `Σ w u²`.
pub fn l2_energy(u: &[f64], weights: &[f64]) -> f64 {
    u.iter().zip(weights).map(|(a, w)| w * a * a).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers(nu: f64, dt: f64, steps: usize, initial: InitialCondition) -> FomConfig {
        FomConfig {
            equation: Equation::Burgers,
            viscosity: nu,
            dt,
            n_steps: steps,
            snapshot_stride: 1,
            seed: 7,
            forcing_amplitude: 0.0,
            spinup_fraction: 0.0,
            initial,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(15, 1.0).is_err());
        assert!(GridSpec::new(8, 1.0).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
        let g = GridSpec::new(64, 2.0).unwrap();
        assert!((g.quad_weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn stride_must_divide_steps() {
        let c = FomConfig { n_steps: 10, snapshot_stride: 3, ..FomConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn viscous_burgers_decays_monotonically() {
        let g = GridSpec::new(64, 1.0).unwrap();
        let c = burgers(1.0, 1e-4, 200, InitialCondition::Sine { mode: 1, amplitude: 1.0 });
        let s = run_fom(&c, &g).unwrap();
        let w = g.quad_weights();
        let e: Vec<f64> = (0..s.len()).map(|k| l2_energy(&s.row(k), &w)).collect();
        assert!(e.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn single_bdf1_step_matches_hand_update() {
        // u0 = sin(qx): -(u²/2)_x = -(q/2) sin(2qx), so one implicit-Euler step gives
        // sin(qx)/(1 + dt ν q²) - dt (q/2) sin(2qx)/(1 + 4 dt ν q²).
        let l = 2.0;
        let g = GridSpec::new(32, l).unwrap();
        let (nu, dt) = (0.01, 1e-3);
        let c = burgers(nu, dt, 1, InitialCondition::Sine { mode: 1, amplitude: 1.0 });
        let s = run_fom(&c, &g).unwrap();
        let q = 2.0 * std::f64::consts::PI / l;
        for (i, &x) in g.coordinates().iter().enumerate() {
            let expected = (q * x).sin() / (1.0 + dt * nu * q * q)
                - dt * 0.5 * q * (2.0 * q * x).sin() / (1.0 + 4.0 * dt * nu * q * q);
            assert!((s.fields[(0, i)] - expected).abs() < 1e-12);
        }
        assert!((s.times[0] - dt).abs() < 1e-15);
    }

    #[test]
    fn blow_up_reports_step() {
        // Anti-diffusive KS with a huge amplitude and a tiny hyperviscosity.
        let g = GridSpec::new(32, 22.0).unwrap();
        let c = FomConfig {
            equation: Equation::KuramotoSivashinsky,
            viscosity: 1e-12,
            dt: 1e-3,
            n_steps: 200_000,
            snapshot_stride: 1000,
            initial: InitialCondition::Sine { mode: 3, amplitude: 1.0 },
            ..FomConfig::default()
        };
        match run_fom(&c, &g) {
            Err(RegromError::BlowUp { step }) => assert!(step > 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn cfl_violation_rejected() {
        let g = GridSpec::new(64, 1.0).unwrap();
        let c = burgers(0.01, 1.0, 1, InitialCondition::Sine { mode: 1, amplitude: 1.0 });
        assert!(matches!(run_fom(&c, &g), Err(RegromError::Config(_))));
    }
}
