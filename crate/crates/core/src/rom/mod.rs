//! Reduced-order time integrators.
//!
//! Every model advances `da/dt = -C(ã, a) - L a + f` with the BDF3/EXT3 scheme of
//! [`crate::timestep`]: the fluctuation block of `L` is implicit, the advection,
//! the zeroth-mode coupling and the forcing are extrapolated. Models differ only in
//! the hooks of [`RomModel`], and are looked up by name in a [`ModelRegistry`].

mod integrator;
mod models;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};
use crate::filter::FilterOperator;
use crate::operators::RomOperators;

pub use integrator::integrate;
pub use models::{EfrRom, GalerkinRom, LerayRom, TimeRelaxationRom};

/// Coefficient norm growth, relative to the initial norm, that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

/// Evolve scheme of the EFR model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvolveScheme {
    /// The shared BDF3/EXT3 step.
    #[default]
    Bdf,
    /// `w = a + Δt · rhs(a)`, diffusion explicit.
    ForwardEuler,
}

/// Time discretization of the TR relaxation term `χ(a - ā)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Relaxation {
    /// Folded into the implicit matrix as `χ(I - F)`.
    #[default]
    Implicit,
    /// Extrapolated with the advection.
    Explicit,
}

#[derive(Clone, Debug)]
pub struct RegRomConfig {
    pub model: String,
    pub n: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub nu: f64,
    pub filter: Option<Arc<FilterOperator>>,
    pub chi: Option<f64>,
    /// `a(0)` on modes `1..=N`.
    pub initial_coefficients: DVector<f64>,
    /// Earlier levels `a(-Δt), a(-2Δt)`, newest first. With both present the run
    /// starts at third order instead of ramping through BDF1 and BDF2.
    pub history: Vec<DVector<f64>>,
    pub save_stride: usize,
    pub evolve: EvolveScheme,
    pub relaxation: Relaxation,
}

impl RegRomConfig {
    pub fn new(model: &str, initial_coefficients: DVector<f64>, dt: f64, n_steps: usize, nu: f64) -> Self {
        Self {
            model: model.to_string(),
            n: initial_coefficients.len(),
            dt,
            n_steps,
            nu,
            filter: None,
            chi: None,
            initial_coefficients,
            history: Vec::new(),
            save_stride: 1,
            evolve: EvolveScheme::Bdf,
            relaxation: Relaxation::Implicit,
        }
    }

    pub fn with_filter(mut self, filter: FilterOperator) -> Self {
        self.filter = Some(Arc::new(filter));
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = Some(chi);
        self
    }

    pub fn chi_or_zero(&self) -> f64 {
        self.chi.unwrap_or(0.0)
    }

    pub(crate) fn filter_ref(&self) -> Result<&FilterOperator> {
        self.filter
            .as_deref()
            .ok_or_else(|| RegromError::Config(format!("model '{}' needs a filter", self.model)))
    }
}

/// How the first steps were started.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Startup {
    Ramp,
    History,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// One row per saved step, `N` columns; row 0 is the initial state.
    pub history: DMatrix<f64>,
    pub times: Vec<f64>,
    /// First step at which the run diverged; the history stops before it.
    pub diverged: Option<usize>,
    pub wall_time: f64,
    /// Leading rows produced before the scheme reached third order.
    pub startup_rows: usize,
    pub startup: Startup,
    /// Filter applications (triangular-solve pairs) performed during the run.
    pub filter_solves: usize,
}

impl RunResult {
    pub fn n_rows(&self) -> usize {
        self.history.nrows()
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged.is_some()
    }

    /// Rows past the startup ramp.
    pub fn statistics_rows(&self) -> std::ops::Range<usize> {
        self.startup_rows.min(self.n_rows())..self.n_rows()
    }
}

/// Per-model hooks into the shared integrator. All hooks see full `(N+1)` vectors
/// with `a₀ = 1` unless stated otherwise.
pub trait RomModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn requires_filter(&self) -> bool {
        true
    }

    fn uses_chi(&self) -> bool {
        false
    }

    fn validate(&self, config: &RegRomConfig) -> Result<()> {
        check_slots(self.name(), self.requires_filter(), self.uses_chi(), config)?;
        if config.evolve != EvolveScheme::Bdf {
            return Err(RegromError::Config(format!("model '{}' has no alternative evolve step", self.name())));
        }
        Ok(())
    }

    /// Matrix added to the implicit fluctuation operator.
    fn implicit_term(&self, _config: &RegRomConfig) -> Result<Option<DMatrix<f64>>> {
        Ok(None)
    }

    /// Advecting coefficients substituted for `k` in `C_ikj a_k a_j`. Returns the
    /// number of filter applications.
    fn advecting(&self, _config: &RegRomConfig, a: &[f64], out: &mut [f64]) -> Result<usize> {
        out.copy_from_slice(a);
        Ok(0)
    }

    /// Adds extrapolated model terms to the fluctuation right-hand side.
    fn explicit_term(&self, _config: &RegRomConfig, _a: &[f64], _rhs: &mut [f64]) -> Result<usize> {
        Ok(0)
    }

    /// Post-processes the evolved fluctuation coefficients.
    fn post_step(&self, _config: &RegRomConfig, _w: &mut DVector<f64>) -> Result<usize> {
        Ok(0)
    }
}

/// Checks that the filter and `χ` slots are filled exactly when the model uses them.
pub fn check_slots(name: &str, filter: bool, chi: bool, config: &RegRomConfig) -> Result<()> {
    let word = |needed: bool| if needed { "needs a" } else { "takes no" };
    if filter != config.filter.is_some() {
        return Err(RegromError::Config(format!("model '{name}' {} filter", word(filter))));
    }
    if chi != config.chi.is_some() {
        return Err(RegromError::Config(format!("model '{name}' {} relaxation parameter", word(chi))));
    }
    Ok(())
}

/// Name-keyed table of models.
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Box<dyn RomModel>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(GalerkinRom));
        r.register(Box::new(LerayRom));
        r.register(Box::new(EfrRom));
        r.register(Box::new(TimeRelaxationRom));
        r
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { models: BTreeMap::new() }
    }

    /// Adds a model, replacing any previous one of the same name.
    pub fn register(&mut self, model: Box<dyn RomModel>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Result<&dyn RomModel> {
        self.models
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| RegromError::Config(format!("unknown model '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.models.keys().copied()
    }

    pub fn run(&self, config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
        integrate(self.get(&config.model)?, config, ops)
    }
}

/// Runs `config.model` from the default registry.
pub fn run_model(config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    ModelRegistry::default().run(config, ops)
}

pub fn run_grom(config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    integrate(&GalerkinRom, config, ops)
}

pub fn run_lrom(config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    integrate(&LerayRom, config, ops)
}

pub fn run_efr(config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    integrate(&EfrRom, config, ops)
}

pub fn run_tr(config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    integrate(&TimeRelaxationRom, config, ops)
}
