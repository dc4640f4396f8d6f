use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{EvolveScheme, RegRomConfig, RomModel, RunResult, Startup, DIVERGENCE_FACTOR};
use crate::error::{RegromError, Result};
use crate::linalg::DenseSolver;
use crate::operators::RomOperators;
use crate::timestep::BdfExt;

fn check(config: &RegRomConfig, ops: &RomOperators) -> Result<()> {
    let n = ops.n;
    if config.n != n {
        return Err(RegromError::Dimension { context: "model size N", expected: n, actual: config.n });
    }
    if config.initial_coefficients.len() != n {
        return Err(RegromError::Dimension {
            context: "initial coefficients",
            expected: n,
            actual: config.initial_coefficients.len(),
        });
    }
    if let Some(h) = config.history.iter().find(|h| h.len() != n) {
        return Err(RegromError::Dimension { context: "startup history", expected: n, actual: h.len() });
    }
    if let Some(f) = &config.filter {
        if f.n != n {
            return Err(RegromError::Dimension { context: "filter size", expected: n, actual: f.n });
        }
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(RegromError::Config(format!("dt {} must be positive", config.dt)));
    }
    if !(config.nu >= 0.0) {
        return Err(RegromError::Config(format!("viscosity {} must be nonnegative", config.nu)));
    }
    if config.save_stride == 0 {
        return Err(RegromError::Config("save_stride must be positive".into()));
    }
    Ok(())
}

struct Explicit<'a> {
    model: &'a dyn RomModel,
    config: &'a RegRomConfig,
    ops: &'a RomOperators,
    /// Forcing minus the zeroth-mode column of `L`, modes `1..=N`.
    constant: Vec<f64>,
    full: Vec<f64>,
    adv: Vec<f64>,
    solves: usize,
}

impl Explicit<'_> {
    /// `-C(ã, a) + f - L_{·0} + model terms` on modes `1..=N`.
    fn eval(&mut self, a: &DVector<f64>) -> Result<DVector<f64>> {
        self.full[0] = 1.0;
        self.full[1..].copy_from_slice(a.as_slice());
        self.solves += self.model.advecting(self.config, &self.full, &mut self.adv)?;
        let mut out = vec![0.0; self.ops.n];
        self.ops.advection_into(&self.adv, &self.full, &mut out);
        for (o, c) in out.iter_mut().zip(&self.constant) {
            *o = c - *o;
        }
        self.solves += self.model.explicit_term(self.config, &self.full, &mut out)?;
        Ok(DVector::from_vec(out))
    }
}

/// Integrates `config` with the hooks of `model`. Divergence (a non-finite
/// coefficient, or a norm above `DIVERGENCE_FACTOR` times the initial norm, or
/// times one when the initial state is zero) ends the run early without error.
pub fn integrate(model: &dyn RomModel, config: &RegRomConfig, ops: &RomOperators) -> Result<RunResult> {
    model.validate(config)?;
    check(config, ops)?;
    let start = Instant::now();
    let n = ops.n;
    let dt = config.dt;

    let lin = ops.linear_operator(config.nu);
    let mut implicit = lin.view((1, 1), (n, n)).into_owned();
    if let Some(extra) = model.implicit_term(config)? {
        implicit += extra;
    }
    let constant: Vec<f64> = (0..n).map(|i| ops.forcing[i + 1] - lin[(i + 1, 0)]).collect();
    let mut solvers = Vec::new();
    if config.evolve == EvolveScheme::Bdf {
        for order in 1..=3 {
            let shift = BdfExt::startup(order).gamma0() / dt;
            solvers.push(DenseSolver::new(DMatrix::identity(n, n) * shift + &implicit)?);
        }
    }

    let mut explicit = Explicit {
        model,
        config,
        ops,
        constant,
        full: vec![0.0; n + 1],
        adv: vec![0.0; n + 1],
        solves: 0,
    };

    let a0 = config.initial_coefficients.clone();
    let mut states = vec![a0.clone()];
    let startup = if config.history.len() >= 2 {
        states.extend(config.history.iter().take(2).cloned());
        Startup::History
    } else {
        Startup::Ramp
    };
    let mut nonlinear = Vec::with_capacity(3);
    for s in &states {
        nonlinear.push(explicit.eval(s)?);
    }
    let ramp_steps = if startup == Startup::History { 0 } else { 2 };

    let reference = if a0.norm() > 0.0 { a0.norm() } else { 1.0 };
    let limit = DIVERGENCE_FACTOR * reference;
    let mut rows: Vec<DVector<f64>> = vec![a0];
    let mut times = vec![0.0];
    let mut startup_rows = usize::from(ramp_steps > 0);
    let mut diverged = None;

    for step in 1..=config.n_steps {
        let order = states.len().min(3);
        let mut w = match config.evolve {
            EvolveScheme::Bdf => {
                let s: Vec<&[f64]> = states.iter().map(|v| v.as_slice()).collect();
                let nl: Vec<&[f64]> = nonlinear.iter().map(|v| v.as_slice()).collect();
                let rhs = BdfExt::startup(order).explicit_rhs(&s, &nl, dt);
                solvers[order - 1].solve(&DVector::from_vec(rhs))
            }
            EvolveScheme::ForwardEuler => &states[0] + (&nonlinear[0] - &implicit * &states[0]) * dt,
        };
        explicit.solves += model.post_step(config, &mut w)?;
        let norm = w.norm();
        if !norm.is_finite() || w.iter().any(|v| !v.is_finite()) || norm > limit {
            diverged = Some(step);
            break;
        }
        let nl = explicit.eval(&w)?;
        if nl.iter().any(|v| !v.is_finite()) {
            diverged = Some(step);
            break;
        }
        if step % config.save_stride == 0 {
            rows.push(w.clone());
            times.push(step as f64 * dt);
            if step <= ramp_steps {
                startup_rows += 1;
            }
        }
        states.insert(0, w);
        nonlinear.insert(0, nl);
        states.truncate(3);
        nonlinear.truncate(3);
    }

    let history = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    Ok(RunResult {
        history,
        times,
        diverged,
        wall_time: start.elapsed().as_secs_f64(),
        startup_rows,
        startup,
        filter_solves: explicit.solves,
    })
}
