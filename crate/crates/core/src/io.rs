//! Binary containers and `key = value` configuration files.
//!
//! Every container starts with an 8-byte magic followed by little-endian `u64` and
//! `f64` fields. Layouts:
//!
//! ```text
//! REGROM1\0  u64 K, u64 n, f64 L, f64[K] times, f64[K*n] fields (row-major), f64[n] weights
//! PODBAS1\0  u64 N, u64 n, f64 L, u64 K, u64 n_eig, f64[n] zeroth mode,
//!            f64[N*n] modes (one mode per row), f64[n_eig] eigenvalues, f64[n] weights
//! ROMOPS1\0  u64 N, u64 equation (0 burgers, 1 ks), f64 viscosity, f64[(N+1)^2] A,
//!            f64[(N+1)^2] B, f64[(N+1)^3] C (index order i,k,j),
//!            f64[(N+1)^2] biharmonic stiffness, f64[N+1] forcing, f64[N] initial coefficients
//! ROMRUN1\0  u64 rows, u64 N, u64 diverged_step (u64::MAX if none), u64 startup_rows,
//!            u64 startup (0 ramp, 1 history), u64 filter_solves, f64 wall_time,
//!            f64[rows] times, f64[rows*N] coefficient history (row-major)
//! ```
//!
//! Matrices are row-major.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{RegromError, Result};
use crate::fom::{Equation, GridSpec, SnapshotSet};
use crate::operators::RomOperators;
use crate::pod::PodBasis;
use crate::rom::{RunResult, Startup};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"REGROM1\0";
pub const BASIS_MAGIC: &[u8; 8] = b"PODBAS1\0";
pub const OPS_MAGIC: &[u8; 8] = b"ROMOPS1\0";
pub const RUN_MAGIC: &[u8; 8] = b"ROMRUN1\0";

/// Little-endian byte sink.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 8]) -> Self {
        Self { buf: magic.to_vec() }
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> &mut Self {
        for v in vs {
            self.f64(*v);
        }
        self
    }

    /// Row-major dump of a matrix.
    pub fn matrix(&mut self, m: &DMatrix<f64>) -> &mut Self {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
        self
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if buf.len() < 8 || &buf[..8] != magic {
            return Err(RegromError::Format(format!(
                "expected magic {:?}",
                String::from_utf8_lossy(&magic[..7])
            )));
        }
        Ok(Self { buf, pos: 8 })
    }

    fn take(&mut self) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        if end > self.buf.len() {
            return Err(RegromError::Format("unexpected end of file".into()));
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(b)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| RegromError::Format(format!("size {v} too large")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(RegromError::Format("unexpected end of file".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let data = self.f64s(rows * cols)?;
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(RegromError::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_snapshots(s: &SnapshotSet) -> Vec<u8> {
    let mut e = Encoder::new(SNAPSHOT_MAGIC);
    e.u64(s.len() as u64)
        .u64(s.grid.n_points as u64)
        .f64(s.grid.domain_length)
        .f64s(&s.times)
        .matrix(&s.fields)
        .f64s(&s.quad_weights);
    e.into_bytes()
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<SnapshotSet> {
    let mut d = Decoder::new(bytes, SNAPSHOT_MAGIC)?;
    let k = d.usize()?;
    let n = d.usize()?;
    let l = d.f64()?;
    let grid = GridSpec::new(n, l)?;
    let times = d.f64s(k)?;
    let fields = d.matrix(k, n)?;
    let weights = d.f64s(n)?;
    d.finish()?;
    SnapshotSet::new(grid, times, fields, weights)
}

pub fn write_snapshots(path: impl AsRef<Path>, s: &SnapshotSet) -> Result<()> {
    write_bytes(path, &encode_snapshots(s))
}

pub fn read_snapshots(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    decode_snapshots(&read_bytes(path)?)
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn encode_basis(b: &PodBasis) -> Vec<u8> {
    let mut e = Encoder::new(BASIS_MAGIC);
    e.u64(b.n_modes() as u64)
        .u64(b.grid.n_points as u64)
        .f64(b.grid.domain_length)
        .u64(b.n_snapshots as u64)
        .u64(b.eigenvalues.len() as u64)
        .f64s(b.zeroth_mode.iter())
        .matrix(&b.modes.transpose())
        .f64s(&b.eigenvalues)
        .f64s(&b.quad_weights);
    e.into_bytes()
}

pub fn decode_basis(bytes: &[u8]) -> Result<PodBasis> {
    let mut d = Decoder::new(bytes, BASIS_MAGIC)?;
    let n_modes = d.usize()?;
    let n = d.usize()?;
    let grid = GridSpec::new(n, d.f64()?)?;
    let n_snapshots = d.usize()?;
    let n_eig = d.usize()?;
    let zeroth_mode = DVector::from_vec(d.f64s(n)?);
    let modes = d.matrix(n_modes, n)?.transpose();
    let eigenvalues = d.f64s(n_eig)?;
    let quad_weights = d.f64s(n)?;
    d.finish()?;
    Ok(PodBasis { grid, zeroth_mode, modes, eigenvalues, n_snapshots, quad_weights })
}

pub fn encode_ops(ops: &RomOperators, initial: &DVector<f64>) -> Result<Vec<u8>> {
    if initial.len() != ops.n {
        return Err(RegromError::Dimension { context: "initial coefficients", expected: ops.n, actual: initial.len() });
    }
    let mut e = Encoder::new(OPS_MAGIC);
    e.u64(ops.n as u64)
        .u64(ops.equation.code())
        .f64(ops.viscosity)
        .matrix(&ops.a)
        .matrix(&ops.b)
        .f64s(&ops.c)
        .matrix(&ops.biharmonic)
        .f64s(ops.forcing.iter())
        .f64s(initial.iter());
    Ok(e.into_bytes())
}

pub fn decode_ops(bytes: &[u8]) -> Result<(RomOperators, DVector<f64>)> {
    let mut d = Decoder::new(bytes, OPS_MAGIC)?;
    let n = d.usize()?;
    let equation = Equation::from_code(d.u64()?)?;
    let viscosity = d.f64()?;
    let e = n + 1;
    let a = d.matrix(e, e)?;
    let b = d.matrix(e, e)?;
    let c = d.f64s(e * e * e)?;
    let biharmonic = d.matrix(e, e)?;
    let forcing = DVector::from_vec(d.f64s(e)?);
    let initial = DVector::from_vec(d.f64s(n)?);
    d.finish()?;
    Ok((RomOperators { n, equation, viscosity, a, b, c, biharmonic, forcing }, initial))
}

pub fn encode_run(r: &RunResult) -> Vec<u8> {
    let mut e = Encoder::new(RUN_MAGIC);
    e.u64(r.n_rows() as u64)
        .u64(r.history.ncols() as u64)
        .u64(r.diverged.map_or(u64::MAX, |s| s as u64))
        .u64(r.startup_rows as u64)
        .u64(match r.startup {
            Startup::Ramp => 0,
            Startup::History => 1,
        })
        .u64(r.filter_solves as u64)
        .f64(r.wall_time)
        .f64s(&r.times)
        .matrix(&r.history);
    e.into_bytes()
}

pub fn decode_run(bytes: &[u8]) -> Result<RunResult> {
    let mut d = Decoder::new(bytes, RUN_MAGIC)?;
    let rows = d.usize()?;
    let n = d.usize()?;
    let diverged = match d.u64()? {
        u64::MAX => None,
        s => Some(usize::try_from(s).map_err(|_| RegromError::Format("step index too large".into()))?),
    };
    let startup_rows = d.usize()?;
    let startup = match d.u64()? {
        0 => Startup::Ramp,
        1 => Startup::History,
        v => return Err(RegromError::Format(format!("unknown startup kind {v}"))),
    };
    let filter_solves = d.usize()?;
    let wall_time = d.f64()?;
    let times = d.f64s(rows)?;
    let history = d.matrix(rows, n)?;
    d.finish()?;
    Ok(RunResult { history, times, diverged, wall_time, startup_rows, startup, filter_solves })
}

/// Parsed `key = value` file. Blank lines and `#` comments are ignored; keys are
/// case-sensitive and must be unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                RegromError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(RegromError::Config(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| RegromError::Config(format!("bad value '{v}' for '{key}'"))),
        }
    }

    pub fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| RegromError::Config(format!("missing key '{key}'")))
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| RegromError::Config(format!("bad list item '{s}' for '{key}'")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}
