//! Grid sweeps over `(model, N, m, δ, χ)`, optimum selection and the
//! reproduction-to-predictive transfer measure.
//!
//! The post-spin-up snapshot horizon `[0, T]` (times relative to the first snapshot)
//! is split into a training window `[0, T/2]` and a predictive window `[0, 3T/4]`.
//! The basis is built from the training snapshots only. Every grid point is
//! integrated once over the predictive window; the statistics of both windows are
//! taken from the same trajectory, so the training rows are a prefix of the
//! predictive run.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{RegromError, Result};
use crate::filter::{build_filter, FilterOperator};
use crate::fom::{Equation, FomConfig, GridSpec, InitialCondition, SnapshotSet};
use crate::io::KeyValues;
use crate::operators::{assemble_operators, RomOperators};
use crate::pod::{build_pod, PodBasis};
use crate::rom::{ModelRegistry, RegRomConfig, RunResult};
use crate::stats::{coefficient_stats, offline_stats, relative_errors, snapshot_stats, Axis, StatsReport, StatsSpec};

pub const WORKERS_ENV: &str = "REGROM_WORKERS";
pub const CSV_HEADER: [&str; 9] = ["model", "N", "m", "delta", "chi", "regime", "eps_uu", "eps_uv", "diverged"];

/// Fraction of the horizon used for training, and for the predictive window.
pub const TRAIN_FRACTION: f64 = 0.5;
pub const PREDICT_FRACTION: f64 = 0.75;

/// Sub-intervals of the δ grid.
pub const DELTA_INTERVALS: [(f64, f64); 3] = [(0.001, 0.01), (0.01, 0.1), (0.1, 1.0)];
pub const FULL_DELTA_POINTS: [usize; 3] = [10, 25, 10];
pub const REDUCED_DELTA_POINTS: [usize; 3] = [4, 5, 5];
/// Extra Leray points on `[0.1, 0.2]` in the full grid.
pub const FULL_LROM_EXTRA: (f64, f64, usize) = (0.1, 0.2, 15);
pub const CHI_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Reproduction,
    Predictive,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Reproduction => "reproduction",
            Regime::Predictive => "predictive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reproduction" => Ok(Regime::Reproduction),
            "predictive" => Ok(Regime::Predictive),
            _ => Err(RegromError::Config(format!("unknown regime '{s}'"))),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sorted union with near-duplicates (relative 1e-12) removed.
fn merge_grid(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    v
}

/// Piecewise-uniform δ grid over the three sub-intervals, scaled by `scale`.
pub fn delta_grid(points: [usize; 3], scale: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for ((a, b), n) in DELTA_INTERVALS.iter().zip(points) {
        v.extend(linspace(*a, *b, n));
    }
    merge_grid(v).into_iter().map(|d| d * scale).collect()
}

/// The full grid, with the extra Leray points.
pub fn full_delta_grid(model: &str, scale: f64) -> Vec<f64> {
    let mut v = delta_grid(FULL_DELTA_POINTS, 1.0);
    if model == "lrom" {
        let (a, b, n) = FULL_LROM_EXTRA;
        v.extend(linspace(a, b, n));
        v = merge_grid(v);
    }
    v.into_iter().map(|d| d * scale).collect()
}

/// `n` uniform points on `[dt, 1]`.
pub fn chi_grid(dt: f64, n: usize) -> Vec<f64> {
    linspace(dt, 1.0, n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub models: Vec<String>,
    pub n_values: Vec<usize>,
    pub m_values: Vec<u32>,
    /// Filter radii for every model except Leray.
    pub delta_grid: Vec<f64>,
    pub lrom_delta_grid: Vec<f64>,
    pub chi_grid: Vec<f64>,
    /// Adds `χ = 0` to the EFR and TR grids.
    pub include_control: bool,
    pub dt: f64,
    pub save_stride: usize,
    pub stats: StatsSpec,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let registry = ModelRegistry::default();
        for m in &self.models {
            registry.get(m)?;
        }
        if self.models.is_empty() || self.n_values.is_empty() || self.m_values.is_empty() {
            return Err(RegromError::Config("models, n_values and m_values must be nonempty".into()));
        }
        if self.delta_grid.is_empty() || self.lrom_delta_grid.is_empty() || self.chi_grid.is_empty() {
            return Err(RegromError::Config("parameter grids must be nonempty".into()));
        }
        if self.m_values.iter().any(|m| !(1..=4).contains(m)) {
            return Err(RegromError::Config("m values must lie in 1..=4".into()));
        }
        if !(self.dt > 0.0) || self.save_stride == 0 {
            return Err(RegromError::Config("dt and save_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn deltas_for(&self, model: &str) -> &[f64] {
        if model == "lrom" {
            &self.lrom_delta_grid
        } else {
            &self.delta_grid
        }
    }

    pub fn chis_for(&self, model: &str) -> Vec<f64> {
        match model {
            "efr" | "tr" => {
                let mut v = self.chi_grid.clone();
                if self.include_control {
                    v.insert(0, 0.0);
                    v = merge_grid(v);
                }
                v
            }
            _ => vec![0.0],
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_values.iter().copied().max().unwrap_or(0)
    }
}

/// Everything a sweep needs from the full-order data.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub basis: PodBasis,
    pub ops: RomOperators,
    /// Projection of the first snapshot onto the `N_max` modes.
    pub initial: DVector<f64>,
    pub train_end: f64,
    pub predict_end: f64,
    pub train_snapshots: SnapshotSet,
    pub predict_snapshots: SnapshotSet,
    pub reference_train: StatsReport,
    pub reference_predict: StatsReport,
}

fn window(snapshots: &SnapshotSet, end: f64) -> Result<SnapshotSet> {
    let t0 = snapshots.times[0];
    let k = snapshots.times.iter().take_while(|&&t| t - t0 <= end * (1.0 + 1e-12)).count();
    snapshots.slice(0..k)
}

impl Benchmark {
    pub fn new(
        snapshots: &SnapshotSet,
        n_max: usize,
        equation: Equation,
        viscosity: f64,
        forcing_amplitude: f64,
        stats: StatsSpec,
    ) -> Result<Self> {
        if snapshots.len() < 8 {
            return Err(RegromError::Config("a sweep needs at least 8 snapshots".into()));
        }
        let horizon = snapshots.times[snapshots.len() - 1] - snapshots.times[0];
        let train_end = TRAIN_FRACTION * horizon;
        let predict_end = PREDICT_FRACTION * horizon;
        let train_snapshots = window(snapshots, train_end)?;
        let predict_snapshots = window(snapshots, predict_end)?;
        let basis = build_pod(&train_snapshots, n_max)?;
        let ops = assemble_operators(&basis, &snapshots.grid, equation, viscosity, forcing_amplitude)?;
        let initial = basis.project(&snapshots.row(0))?;
        Ok(Self {
            reference_train: snapshot_stats(&train_snapshots, stats)?,
            reference_predict: snapshot_stats(&predict_snapshots, stats)?,
            basis,
            ops,
            initial,
            train_end,
            predict_end,
            train_snapshots,
            predict_snapshots,
        })
    }

    pub fn reference(&self, regime: Regime) -> &StatsReport {
        match regime {
            Regime::Reproduction => &self.reference_train,
            Regime::Predictive => &self.reference_predict,
        }
    }

    pub fn window_end(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Reproduction => self.train_end,
            Regime::Predictive => self.predict_end,
        }
    }

    /// Errors of the `n`-mode projection of the snapshots in each regime.
    pub fn projection_errors(&self, n: usize, spec: StatsSpec) -> Result<[(f64, f64); 2]> {
        let sub = self.basis.truncated(n)?;
        let off = offline_stats(&sub, spec);
        let mut out = [(0.0, 0.0); 2];
        for (slot, (snaps, regime)) in out.iter_mut().zip([
            (&self.train_snapshots, Regime::Reproduction),
            (&self.predict_snapshots, Regime::Predictive),
        ]) {
            let coeffs = sub.project_snapshots(snaps)?;
            *slot = relative_errors(&coefficient_stats(&off, &coeffs)?, self.reference(regime))?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub model: String,
    pub n: usize,
    pub m: u32,
    pub delta: f64,
    pub chi: f64,
    pub regime: Regime,
    pub eps_uu: f64,
    pub eps_uv: f64,
    pub diverged: bool,
}

impl SweepRow {
    fn record(&self) -> [String; 9] {
        [
            self.model.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.delta.to_string(),
            self.chi.to_string(),
            self.regime.name().to_string(),
            self.eps_uu.to_string(),
            self.eps_uv.to_string(),
            self.diverged.to_string(),
        ]
    }
}

/// One grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub model: String,
    pub n: usize,
    pub m: u32,
    pub delta: f64,
    pub chi: f64,
}

/// Grid points in output order: model, then `N`, `m`, `δ`, `χ`. Galerkin runs take
/// no filter and appear once per `N` with `m = δ = χ = 0`.
pub fn plan_jobs(plan: &SweepPlan) -> Vec<Job> {
    let mut jobs = Vec::new();
    for model in &plan.models {
        for &n in &plan.n_values {
            if model == "grom" {
                jobs.push(Job { model: model.clone(), n, m: 0, delta: 0.0, chi: 0.0 });
                continue;
            }
            for &m in &plan.m_values {
                for &delta in plan.deltas_for(model) {
                    for chi in plan.chis_for(model) {
                        jobs.push(Job { model: model.clone(), n, m, delta, chi });
                    }
                }
            }
        }
    }
    jobs
}

/// Worker count from `REGROM_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn window_stats(
    offline: &crate::stats::OfflineStats,
    run: &RunResult,
    end: f64,
) -> Result<Option<StatsReport>> {
    let last = run.times.iter().take_while(|&&t| t <= end * (1.0 + 1e-12)).count();
    let reached = run.times.last().is_some_and(|&t| t >= end * (1.0 - 1e-12));
    if run.is_diverged() && !reached {
        return Ok(None);
    }
    let rows = run.startup_rows.min(last)..last;
    let coeffs = run.history.rows(rows.start, rows.len()).into_owned();
    coefficient_stats(offline, &coeffs).map(Some)
}

/// Integrates one grid point over the predictive window.
pub fn run_job(job: &Job, plan: &SweepPlan, bench: &Benchmark, ops: &RomOperators) -> Result<RunResult> {
    let steps = (bench.predict_end / plan.dt).round() as usize;
    let initial = bench.initial.rows(0, job.n).into_owned();
    let mut cfg = RegRomConfig::new(&job.model, initial, plan.dt, steps, ops.viscosity);
    cfg.save_stride = plan.save_stride;
    let registry = ModelRegistry::default();
    let model = registry.get(&job.model)?;
    if model.requires_filter() {
        let filter: FilterOperator = build_filter(ops, job.delta, job.m)?;
        cfg.filter = Some(Arc::new(filter));
    }
    if model.uses_chi() {
        cfg.chi = Some(job.chi);
    }
    crate::rom::integrate(model, &cfg, ops)
}

fn rows_for(job: &Job, run: &RunResult, offline: &crate::stats::OfflineStats, bench: &Benchmark) -> Result<Vec<SweepRow>> {
    let mut out = Vec::with_capacity(2);
    for regime in [Regime::Reproduction, Regime::Predictive] {
        let stats = window_stats(offline, run, bench.window_end(regime))?;
        let (eps_uu, eps_uv, diverged) = match stats {
            Some(s) => {
                let (uu, uv) = relative_errors(&s, bench.reference(regime))?;
                (uu, uv, false)
            }
            None => (f64::INFINITY, f64::INFINITY, true),
        };
        out.push(SweepRow {
            model: job.model.clone(),
            n: job.n,
            m: job.m,
            delta: job.delta,
            chi: job.chi,
            regime,
            eps_uu,
            eps_uv,
            diverged,
        });
    }
    Ok(out)
}

/// Runs `jobs` on a pool of `workers` threads; rows come back in job order.
pub fn run_jobs(jobs: &[Job], plan: &SweepPlan, bench: &Benchmark, workers: usize) -> Result<Vec<SweepRow>> {
    let mut ops_by_n = Vec::new();
    let mut offline_by_n = Vec::new();
    let mut ns: Vec<usize> = jobs.iter().map(|j| j.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        ops_by_n.push((n, bench.ops.truncated(n)?));
        offline_by_n.push((n, offline_stats(&bench.basis.truncated(n)?, plan.stats)));
    }
    let lookup = |n: usize| -> (&RomOperators, &crate::stats::OfflineStats) {
        let i = ns.binary_search(&n).expect("N collected above");
        (&ops_by_n[i].1, &offline_by_n[i].1)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RegromError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<SweepRow>>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (ops, offline) = lookup(job.n);
                let run = run_job(job, plan, bench, ops)?;
                rows_for(job, &run, offline, bench)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(2 * jobs.len());
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Every grid point of `plan`, both regimes, followed by one `proj` row per `N` and
/// regime holding the projection errors.
pub fn run_sweep(plan: &SweepPlan, bench: &Benchmark) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    if plan.n_max() > bench.ops.n {
        return Err(RegromError::Config(format!("plan needs N={} but the benchmark has {}", plan.n_max(), bench.ops.n)));
    }
    let jobs = plan_jobs(plan);
    let mut rows = run_jobs(&jobs, plan, bench, worker_count())?;
    for &n in &plan.n_values {
        let errs = bench.projection_errors(n, plan.stats)?;
        for (regime, (uu, uv)) in [Regime::Reproduction, Regime::Predictive].into_iter().zip(errs) {
            rows.push(SweepRow {
                model: "proj".into(),
                n,
                m: 0,
                delta: 0.0,
                chi: 0.0,
                regime,
                eps_uu: uu,
                eps_uv: uv,
                diverged: false,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub model: String,
    pub n: usize,
    pub m: u32,
    pub delta: f64,
    pub chi: f64,
    pub eps_uv: f64,
    pub eps_uu: f64,
}

fn better(a: &SweepRow, b: &SweepRow) -> bool {
    let ka = if a.diverged || a.eps_uv.is_nan() { f64::INFINITY } else { a.eps_uv };
    let kb = if b.diverged || b.eps_uv.is_nan() { f64::INFINITY } else { b.eps_uv };
    (ka, a.delta, a.chi) < (kb, b.delta, b.chi)
}

/// Per `(model, N, m)` the grid point with the smallest `eps_uv` in `regime`; ties go
/// to the smallest `δ`, then the smallest `χ`. Projection rows are skipped. Output
/// follows first appearance in `rows`.
pub fn select_optima(rows: &[SweepRow], regime: Regime) -> Vec<Selection> {
    let mut best: Vec<&SweepRow> = Vec::new();
    for r in rows.iter().filter(|r| r.regime == regime && r.model != "proj") {
        match best.iter_mut().find(|b| b.model == r.model && b.n == r.n && b.m == r.m) {
            Some(slot) => {
                if better(r, slot) {
                    *slot = r;
                }
            }
            None => best.push(r),
        }
    }
    best.into_iter()
        .map(|r| Selection {
            model: r.model.clone(),
            n: r.n,
            m: r.m,
            delta: r.delta,
            chi: r.chi,
            eps_uv: r.eps_uv,
            eps_uu: r.eps_uu,
        })
        .collect()
}

/// Reruns every selected `(model, N, m)` at its reproduction optimum and reports it
/// on both windows.
pub fn predictive_eval(selection: &[Selection], plan: &SweepPlan, bench: &Benchmark) -> Result<Vec<SweepRow>> {
    let jobs: Vec<Job> = selection
        .iter()
        .map(|s| Job { model: s.model.clone(), n: s.n, m: s.m, delta: s.delta, chi: s.chi })
        .collect();
    run_jobs(&jobs, plan, bench, worker_count())
}

/// Cells whose reproduction optimum equals or neighbors the predictive optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferReport {
    pub cells: Vec<TransferCell>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferCell {
    pub model: String,
    pub n: usize,
    pub m: u32,
    pub recon: (f64, f64),
    pub pred: (f64, f64),
    /// Grid-index distance in `δ` and in `χ`.
    pub distance: (usize, usize),
}

impl TransferCell {
    pub fn hit(&self) -> bool {
        self.distance.0 <= 1 && self.distance.1 <= 1
    }
}

impl TransferReport {
    pub fn fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.hit()).count() as f64 / self.cells.len() as f64
    }
}

fn grid_index(grid: &[f64], v: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map_or(0, |(i, _)| i)
}

/// Compares reproduction and predictive optima of a full sweep, Galerkin excluded.
pub fn transfer_report(rows: &[SweepRow], plan: &SweepPlan) -> TransferReport {
    let recon = select_optima(rows, Regime::Reproduction);
    let pred = select_optima(rows, Regime::Predictive);
    let mut cells = Vec::new();
    for r in recon.iter().filter(|s| s.model != "grom") {
        let Some(p) = pred.iter().find(|p| p.model == r.model && p.n == r.n && p.m == r.m) else {
            continue;
        };
        let deltas = plan.deltas_for(&r.model);
        let chis = plan.chis_for(&r.model);
        let dd = grid_index(deltas, r.delta).abs_diff(grid_index(deltas, p.delta));
        let dc = grid_index(&chis, r.chi).abs_diff(grid_index(&chis, p.chi));
        cells.push(TransferCell {
            model: r.model.clone(),
            n: r.n,
            m: r.m,
            recon: (r.delta, r.chi),
            pred: (p.delta, p.chi),
            distance: (dd, dc),
        });
    }
    TransferReport { cells }
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(buf)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .ok_or_else(|| RegromError::Format(format!("missing column '{name}'")))?
        .trim()
        .parse()
        .map_err(|_| RegromError::Format(format!("bad value in column '{name}'")))
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(RegromError::Format(format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(SweepRow {
            model: field(&rec, 0, "model")?,
            n: field(&rec, 1, "N")?,
            m: field(&rec, 2, "m")?,
            delta: field(&rec, 3, "delta")?,
            chi: field(&rec, 4, "chi")?,
            regime: Regime::parse(rec.get(5).unwrap_or(""))?,
            eps_uu: field(&rec, 6, "eps_uu")?,
            eps_uv: field(&rec, 7, "eps_uv")?,
            diverged: field(&rec, 8, "diverged")?,
        });
    }
    Ok(rows)
}

pub const SELECTION_HEADER: [&str; 7] = ["model", "N", "m", "delta", "chi", "eps_uv", "eps_uu"];

pub fn write_selection<W: Write>(out: W, sel: &[Selection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SELECTION_HEADER)?;
    for s in sel {
        w.write_record([
            s.model.clone(),
            s.n.to_string(),
            s.m.to_string(),
            s.delta.to_string(),
            s.chi.to_string(),
            s.eps_uv.to_string(),
            s.eps_uu.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_selection(path: impl AsRef<Path>) -> Result<Vec<Selection>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(Selection {
            model: field(&rec, 0, "model")?,
            n: field(&rec, 1, "N")?,
            m: field(&rec, 2, "m")?,
            delta: field(&rec, 3, "delta")?,
            chi: field(&rec, 4, "chi")?,
            eps_uv: field(&rec, 5, "eps_uv")?,
            eps_uu: field(&rec, 6, "eps_uu")?,
        });
    }
    Ok(out)
}

/// Full-order run, benchmark and plan described by one `key = value` file.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub fom: FomConfig,
    pub grid: GridSpec,
    pub plan: SweepPlan,
}

impl Experiment {
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        let (fom, grid) = fom_from_keys(kv)?;
        let models = kv
            .list::<String>("models")?
            .unwrap_or_else(|| ["grom", "lrom", "efr", "tr"].map(String::from).to_vec());
        let dt = kv.parsed::<f64>("rom_dt")?.unwrap_or(fom.dt * fom.snapshot_stride as f64);
        let scale = kv.parsed::<f64>("delta_scale")?.unwrap_or(1.0);
        let full = kv.parsed::<bool>("full_grid")?.unwrap_or(false);
        let (delta, lrom_delta) = if let Some(explicit) = kv.list::<f64>("delta_grid")? {
            let g: Vec<f64> = explicit.iter().map(|d| d * scale).collect();
            (g.clone(), g)
        } else if full {
            (full_delta_grid("tr", scale), full_delta_grid("lrom", scale))
        } else {
            let pts = match kv.list::<usize>("delta_points")? {
                Some(p) if p.len() == 3 => [p[0], p[1], p[2]],
                Some(_) => return Err(RegromError::Config("delta_points takes three counts".into())),
                None => REDUCED_DELTA_POINTS,
            };
            let g = delta_grid(pts, scale);
            (g.clone(), g)
        };
        let chi = match kv.list::<f64>("chi_grid")? {
            Some(c) => c,
            None => chi_grid(dt, kv.parsed::<usize>("chi_points")?.unwrap_or(CHI_POINTS)),
        };
        let axis = match kv.get("axis").unwrap_or("homogeneous") {
            "homogeneous" => Axis::Homogeneous,
            "pointwise" => Axis::Pointwise,
            other => return Err(RegromError::Config(format!("unknown axis '{other}'"))),
        };
        let plan = SweepPlan {
            models,
            n_values: kv.list("n_values")?.unwrap_or_else(|| vec![6, 8, 10]),
            m_values: kv.list("m_values")?.unwrap_or_else(|| vec![1]),
            delta_grid: delta,
            lrom_delta_grid: lrom_delta,
            chi_grid: chi,
            include_control: kv.parsed::<bool>("include_control")?.unwrap_or(false),
            dt,
            save_stride: kv.parsed::<usize>("save_stride")?.unwrap_or(1),
            stats: StatsSpec::new(axis),
        };
        plan.validate()?;
        Ok(Self { fom, grid, plan })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_keys(&KeyValues::load(path)?)
    }

    pub fn benchmark(&self, snapshots: &SnapshotSet) -> Result<Benchmark> {
        Benchmark::new(
            snapshots,
            self.plan.n_max(),
            self.fom.equation,
            self.fom.viscosity,
            self.fom.forcing_amplitude,
            self.plan.stats,
        )
    }
}

/// Reads the full-order keys: `equation`, `viscosity`, `dt`, `n_steps`,
/// `snapshot_stride`, `seed`, `forcing_amplitude`, `spinup_fraction`,
/// `noise_amplitude` (or `sine_mode` with `sine_amplitude`), `n_points`,
/// `domain_length`. Missing keys take [`FomConfig::default`] values, and a
/// 64-point grid of length 22.
pub fn fom_from_keys(kv: &KeyValues) -> Result<(FomConfig, GridSpec)> {
    let d = FomConfig::default();
    let initial = match kv.parsed::<usize>("sine_mode")? {
        Some(mode) => InitialCondition::Sine { mode, amplitude: kv.parsed("sine_amplitude")?.unwrap_or(1.0) },
        None => match kv.parsed::<f64>("noise_amplitude")? {
            Some(amplitude) => InitialCondition::Noise { amplitude },
            None => d.initial.clone(),
        },
    };
    let cfg = FomConfig {
        equation: match kv.get("equation") {
            Some(e) => Equation::parse(e)?,
            None => d.equation,
        },
        viscosity: kv.parsed("viscosity")?.unwrap_or(d.viscosity),
        dt: kv.parsed("dt")?.unwrap_or(d.dt),
        n_steps: kv.parsed("n_steps")?.unwrap_or(d.n_steps),
        snapshot_stride: kv.parsed("snapshot_stride")?.unwrap_or(d.snapshot_stride),
        seed: kv.parsed("seed")?.unwrap_or(d.seed),
        forcing_amplitude: kv.parsed("forcing_amplitude")?.unwrap_or(d.forcing_amplitude),
        spinup_fraction: kv.parsed("spinup_fraction")?.unwrap_or(d.spinup_fraction),
        initial,
    };
    cfg.validate()?;
    let grid = GridSpec::new(
        kv.parsed("n_points")?.unwrap_or(64),
        kv.parsed("domain_length")?.unwrap_or(22.0),
    )?;
    Ok((cfg, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_sizes() {
        assert_eq!(full_delta_grid("tr", 1.0).len(), 43);
        assert_eq!(full_delta_grid("lrom", 1.0).len(), 56);
        assert_eq!(delta_grid(REDUCED_DELTA_POINTS, 1.0).len(), 12);
        let g = delta_grid(REDUCED_DELTA_POINTS, 2.0);
        assert!((g[0] - 0.002).abs() < 1e-15 && (g[11] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chi_grid_matches_published_values() {
        let c = chi_grid(0.005, 4);
        for (a, b) in c.iter().zip([0.005, 0.3367, 0.6683, 1.0]) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    fn row(model: &str, delta: f64, chi: f64, eps: f64) -> SweepRow {
        SweepRow {
            model: model.into(),
            n: 4,
            m: 1,
            delta,
            chi,
            regime: Regime::Reproduction,
            eps_uu: 0.0,
            eps_uv: eps,
            diverged: false,
        }
    }

    #[test]
    fn selection_ties_and_divergence() {
        let mut rows = vec![row("tr", 0.2, 0.5, 0.3), row("tr", 0.1, 0.9, 0.3), row("tr", 0.1, 0.4, 0.3)];
        let mut d = row("tr", 0.05, 0.1, 0.01);
        d.diverged = true;
        rows.push(d);
        let s = select_optima(&rows, Regime::Reproduction);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].delta, s[0].chi), (0.1, 0.4));
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row("efr", 0.1, 1.0 / 3.0, 0.25)];
        let mut d = row("grom", 0.0, 0.0, f64::INFINITY);
        d.diverged = true;
        rows.push(d);
        let bytes = rows_to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("model,N,m,delta,chi,regime,eps_uu,eps_uv,diverged\n"));
        let dir = std::env::temp_dir().join(format!("regrom-sweep-{}.csv", std::process::id()));
        std::fs::write(&dir, &bytes).unwrap();
        let back = read_rows(&dir).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(back, rows);
    }
}
