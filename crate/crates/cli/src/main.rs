use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use regrom_core::appendix::{max_identity_gap, random_stiffness};
use regrom_core::filter::build_filter;
use regrom_core::fom::{run_fom_detailed, Equation};
use regrom_core::io::{self, KeyValues};
use regrom_core::operators::assemble_operators;
use regrom_core::pod::build_pod;
use regrom_core::rom::{ModelRegistry, RegRomConfig, Relaxation};
use regrom_core::sem::{assemble_sem1d, filter_study, Boundary, STUDY_WAVENUMBERS};
use regrom_core::sweep::{
    fom_from_keys, predictive_eval, read_selection, run_sweep, select_optima, transfer_report, worker_count,
    write_rows, write_selection, Experiment, Regime,
};

/// Regularized reduced-order models on 1D periodic flows.
#[derive(Parser)]
#[command(name = "regrom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full-order model and write snapshots.
    Fom {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the spectral-element HOAF to a three-sine signal.
    FilterStudy {
        #[arg(long, default_value_t = 64)]
        elements: usize,
        #[arg(long, default_value_t = 7)]
        order: usize,
        #[arg(long, default_value_t = 0.025)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        m: Vec<u32>,
        #[arg(long, default_value = "dirichlet0")]
        boundary: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a POD basis from snapshots.
    Pod {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble reduced operators.
    Ops {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
        /// Full-order config supplying equation, viscosity and forcing.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        equation: Option<String>,
        #[arg(long)]
        viscosity: Option<f64>,
        #[arg(long)]
        forcing: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate one reduced model.
    Run {
        #[arg(long)]
        ops: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        save_stride: usize,
        /// TR relaxation term: implicit or explicit.
        #[arg(long, default_value = "implicit")]
        relaxation: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over (model, N, m, δ, χ).
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the reproduction optima.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Evaluate selected parameters on both windows.
    Predict {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the mixed-form m = 2 identity.
    VerifyAppendix {
        /// Use the stiffness of these operators instead of random ones.
        #[arg(long)]
        ops: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "5,30,100")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        vectors: usize,
        #[arg(long, default_value_t = 0.025)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fom { config, out } => fom(config, out),
        Command::FilterStudy { elements, order, delta, m, boundary, out } => {
            study(elements, order, delta, &m, &boundary, out)
        }
        Command::Pod { snapshots, n, out } => {
            let snaps = io::read_snapshots(&snapshots)?;
            let basis = build_pod(&snaps, n)?;
            io::write_bytes(&out, &io::encode_basis(&basis))?;
            let total: f64 = basis.eigenvalues.iter().sum();
            let kept: f64 = basis.eigenvalues.iter().take(n).sum();
            println!(
                "{} snapshots, rank {}, {} modes capture {:.6} of the fluctuation energy",
                basis.n_snapshots,
                basis.numerical_rank(),
                n,
                kept / total
            );
            Ok(())
        }
        Command::Ops { basis, snapshots, config, equation, viscosity, forcing, out } => {
            let basis = io::decode_basis(&io::read_bytes(&basis)?)?;
            let snaps = io::read_snapshots(&snapshots)?;
            let (mut eq, mut nu, mut f) = (Equation::KuramotoSivashinsky, 1.0, 0.0);
            if let Some(path) = config {
                let (cfg, _) = fom_from_keys(&KeyValues::load(&path)?)?;
                (eq, nu, f) = (cfg.equation, cfg.viscosity, cfg.forcing_amplitude);
            }
            if let Some(e) = equation {
                eq = Equation::parse(&e)?;
            }
            nu = viscosity.unwrap_or(nu);
            f = forcing.unwrap_or(f);
            let ops = assemble_operators(&basis, &snaps.grid, eq, nu, f)?;
            let initial = basis.project(&snaps.row(0))?;
            io::write_bytes(&out, &io::encode_ops(&ops, &initial)?)?;
            println!("{} operators, N = {}, ν = {}", eq.name(), ops.n, nu);
            Ok(())
        }
        Command::Run { ops, model, n, delta, chi, m, dt, steps, save_stride, relaxation, out } => {
            let (ops, initial) = io::decode_ops(&io::read_bytes(&ops)?)?;
            let n = n.unwrap_or(ops.n);
            let ops = ops.truncated(n)?;
            let registry = ModelRegistry::default();
            let handle = registry.get(&model)?;
            let mut cfg = RegRomConfig::new(&model, initial.rows(0, n).into_owned(), dt, steps, ops.viscosity);
            cfg.save_stride = save_stride;
            cfg.relaxation = match relaxation.as_str() {
                "implicit" => Relaxation::Implicit,
                "explicit" => Relaxation::Explicit,
                other => bail!("unknown relaxation '{other}'"),
            };
            if handle.requires_filter() {
                let delta = delta.context("this model needs --delta")?;
                cfg.filter = Some(Arc::new(build_filter(&ops, delta, m)?));
            }
            if handle.uses_chi() {
                cfg.chi = Some(chi.context("this model needs --chi")?);
            }
            let run = registry.run(&cfg, &ops)?;
            io::write_bytes(&out, &io::encode_run(&run))?;
            match run.diverged {
                Some(step) => println!("{model}: diverged at step {step}"),
                None => println!("{model}: {} rows in {:.3} s", run.n_rows(), run.wall_time),
            }
            Ok(())
        }
        Command::Sweep { plan, out, selection } => {
            let exp = Experiment::load(&plan)?;
            let snaps = regrom_core::fom::run_fom(&exp.fom, &exp.grid)?;
            let bench = exp.benchmark(&snaps)?;
            eprintln!("sweeping on {} workers", worker_count());
            let rows = run_sweep(&exp.plan, &bench)?;
            write_rows(BufWriter::new(File::create(&out)?), &rows)?;
            let best = select_optima(&rows, Regime::Reproduction);
            for s in &best {
                println!("{} N={} m={} δ={} χ={} eps_uv={:.4e}", s.model, s.n, s.m, s.delta, s.chi, s.eps_uv);
            }
            println!("transfer fraction {:.3}", transfer_report(&rows, &exp.plan).fraction());
            if let Some(path) = selection {
                write_selection(BufWriter::new(File::create(path)?), &best)?;
            }
            Ok(())
        }
        Command::Predict { plan, selection, out } => {
            let exp = Experiment::load(&plan)?;
            let sel = read_selection(&selection)?;
            let snaps = regrom_core::fom::run_fom(&exp.fom, &exp.grid)?;
            let bench = exp.benchmark(&snaps)?;
            let rows = predictive_eval(&sel, &exp.plan, &bench)?;
            write_rows(BufWriter::new(File::create(&out)?), &rows)?;
            println!("{} rows", rows.len());
            Ok(())
        }
        Command::VerifyAppendix { ops, n, vectors, delta, seed, tolerance } => {
            let mut cases = Vec::new();
            if let Some(path) = ops {
                let (ops, _) = io::decode_ops(&io::read_bytes(&path)?)?;
                cases.push((ops.n, ops.stiffness_fluct()));
            } else {
                for &k in &n {
                    cases.push((k, random_stiffness(k, seed + k as u64)));
                }
            }
            let mut ok = true;
            for (k, a) in cases {
                let gap = max_identity_gap(&a, delta, vectors, seed)?;
                let pass = gap <= tolerance;
                ok &= pass;
                println!("N={k:<4} max relative gap {gap:.3e} {}", if pass { "PASS" } else { "FAIL" });
            }
            if !ok {
                bail!("mixed-form solve disagrees with the m = 2 filter");
            }
            Ok(())
        }
    }
}

fn fom(config: PathBuf, out: PathBuf) -> Result<()> {
    let kv = KeyValues::load(&config).with_context(|| format!("reading {}", config.display()))?;
    let (cfg, grid) = fom_from_keys(&kv)?;
    let run = run_fom_detailed(&cfg, &grid)?;
    io::write_snapshots(&out, &run.snapshots)?;
    println!(
        "{}: {} snapshots on {} points, initial condition {}",
        cfg.equation.name(),
        run.snapshots.len(),
        grid.n_points,
        run.initial_condition
    );
    Ok(())
}

fn study(elements: usize, order: usize, delta: f64, orders: &[u32], boundary: &str, out: PathBuf) -> Result<()> {
    let space = assemble_sem1d(elements, order, Boundary::parse(boundary)?)?;
    let st = filter_study(&space, delta, orders)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&out)?));
    let mut header = vec!["x".to_string(), "u_in".to_string()];
    header.extend(st.orders.iter().map(|m| format!("u_m{m}")));
    w.write_record(&header)?;
    for i in 0..st.x.len() {
        let mut rec = vec![st.x[i].to_string(), st.input[i].to_string()];
        rec.extend(st.outputs.iter().map(|o| o[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    for (m, ratios) in st.orders.iter().zip(&st.amplitude_ratios) {
        let parts: Vec<String> =
            STUDY_WAVENUMBERS.iter().zip(ratios).map(|(k, r)| format!("k={k}: {r:.4}")).collect();
        println!("m={m} amplitude ratios {}", parts.join(", "));
    }
    Ok(())
}
