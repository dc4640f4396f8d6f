#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use regrom_core::fom::{run_fom, Equation, FomConfig, GridSpec, InitialCondition, SnapshotSet};
use regrom_core::operators::{assemble_operators, RomOperators};
use regrom_core::pod::{build_pod, PodBasis};

pub fn ks_config(n_steps: usize, stride: usize, seed: u64) -> FomConfig {
    FomConfig {
        equation: Equation::KuramotoSivashinsky,
        viscosity: 1.0,
        dt: 0.01,
        n_steps,
        snapshot_stride: stride,
        seed,
        forcing_amplitude: 0.0,
        spinup_fraction: 0.2,
        initial: InitialCondition::Noise { amplitude: 0.1 },
    }
}

pub fn ks_grid() -> GridSpec {
    GridSpec::new(64, 22.0).unwrap()
}

/// 400 snapshots of KS on L = 22, one every 0.2 time units after spin-up.
pub fn ks_snapshots() -> &'static SnapshotSet {
    static S: OnceLock<SnapshotSet> = OnceLock::new();
    S.get_or_init(|| run_fom(&ks_config(10_000, 20, 7), &ks_grid()).unwrap())
}

/// KS basis and operators with 20 modes.
pub fn ks_model() -> &'static (PodBasis, RomOperators) {
    static M: OnceLock<(PodBasis, RomOperators)> = OnceLock::new();
    M.get_or_init(|| {
        let snaps = ks_snapshots();
        let basis = build_pod(snaps, 20).unwrap();
        let ops = assemble_operators(&basis, &snaps.grid, Equation::KuramotoSivashinsky, 1.0, 0.0).unwrap();
        (basis, ops)
    })
}

pub fn ks_initial(n: usize) -> DVector<f64> {
    let (basis, _) = ks_model();
    let a = basis.project(&ks_snapshots().row(0)).unwrap();
    a.rows(0, n).into_owned()
}

/// Symmetric positive definite matrix with spectrum in `[0.1, ...)`.
pub fn spd(n: usize, seed: u64) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    (&a + a.transpose()) * 0.5
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Reduced operators built by hand: everything zero except what the caller sets.
pub fn blank_ops(n: usize, equation: Equation, viscosity: f64) -> RomOperators {
    RomOperators {
        n,
        equation,
        viscosity,
        a: DMatrix::zeros(n + 1, n + 1),
        b: DMatrix::identity(n + 1, n + 1),
        c: vec![0.0; (n + 1).pow(3)],
        biharmonic: DMatrix::zeros(n + 1, n + 1),
        forcing: DVector::zeros(n + 1),
    }
}

pub fn max_row_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (0..a.nrows()).map(|r| (a.row(r) - b.row(r)).norm()).fold(0.0, f64::max)
}
