//! Fourier pseudo-spectral operators on a uniform periodic grid.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n_points;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let base = 2.0 * std::f64::consts::PI / grid.domain_length;
        let cutoff = Self::dealias_cutoff(n) as i64;
        let mut wavenumbers = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for j in 0..n {
            let k = signed_index(j, n);
            wavenumbers.push(base * k as f64);
            keep.push(k.abs() <= cutoff);
        }
        Self { n, fwd, inv, wavenumbers, keep }
    }

    /// Largest retained integer wavenumber under the 2/3 rule: products of two
    /// retained fields alias only into discarded modes when `3·cutoff < n`.
    pub fn dealias_cutoff(n: usize) -> usize {
        (n - 1) / 3
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Angular wavenumbers `2πk/L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse transform, normalized, real part only.
    pub fn inverse(&self, uh: &[Complex64]) -> Vec<f64> {
        let mut buf = uh.to_vec();
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Projects a spectrum onto the transforms of real fields, `û_{n-j} = conj(û_j)`.
    /// Without it, round-off in the imaginary part of the field evolves under the
    /// linear operator alone and grows in any unstable band.
    pub fn make_real(&self, uh: &mut [Complex64]) {
        let n = self.n;
        uh[0].im = 0.0;
        if n.is_multiple_of(2) {
            uh[n / 2].im = 0.0;
        }
        for j in 1..n.div_ceil(2) {
            let avg = 0.5 * (uh[j] + uh[n - j].conj());
            uh[j] = avg;
            uh[n - j] = avg.conj();
        }
    }

    pub fn dealias(&self, uh: &mut [Complex64]) {
        for (c, &k) in uh.iter_mut().zip(&self.keep) {
            if !k {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Multiplier of the `order`-th derivative; the Nyquist mode is dropped for odd orders.
    fn derivative_symbol(&self, j: usize, order: u32) -> Complex64 {
        let k = self.wavenumbers[j];
        if order % 2 == 1 && self.n.is_multiple_of(2) && j == self.n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k).powu(order)
    }

    pub fn derivative_hat(&self, uh: &[Complex64], order: u32) -> Vec<Complex64> {
        uh.iter()
            .enumerate()
            .map(|(j, &c)| c * self.derivative_symbol(j, order))
            .collect()
    }

    pub fn derivative(&self, u: &[f64], order: u32) -> Vec<f64> {
        let uh = self.forward(u);
        self.inverse(&self.derivative_hat(&uh, order))
    }

    /// Fourier coefficients of `-(u^2/2)_x`, with both the input and the product
    /// truncated by the 2/3 rule.
    pub fn advection_hat(&self, uh: &[Complex64]) -> Vec<Complex64> {
        let mut trunc = uh.to_vec();
        self.dealias(&mut trunc);
        let u = self.inverse(&trunc);
        let sq: Vec<f64> = u.iter().map(|&x| 0.5 * x * x).collect();
        let mut ph = self.forward(&sq);
        self.dealias(&mut ph);
        let mut out = self.derivative_hat(&ph, 1);
        for c in out.iter_mut() {
            *c = -*c;
        }
        out
    }
}

pub fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    #[test]
    fn make_real_removes_imaginary_field() {
        let g = GridSpec::new(16, 1.0).unwrap();
        let sp = Spectral::new(&g);
        let mut uh = sp.forward(&(0..16).map(|i| (i as f64).cos()).collect::<Vec<_>>());
        let clean = uh.clone();
        uh[3] += Complex64::new(1e-3, 2e-3);
        sp.make_real(&mut uh);
        let mut buf = uh.clone();
        sp.inv.process(&mut buf);
        assert!(buf.iter().all(|c| c.im.abs() < 1e-14));
        sp.make_real(&mut uh);
        let mut again = clean.clone();
        sp.make_real(&mut again);
        for (a, b) in again.iter().zip(&clean) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid(32, 3.0);
        let sp = Spectral::new(&g);
        let q = 2.0 * std::f64::consts::PI * 3.0 / 3.0;
        let x = g.coordinates();
        let u: Vec<f64> = x.iter().map(|&x| (q * x).sin()).collect();
        let du = sp.derivative(&u, 1);
        let d2u = sp.derivative(&u, 2);
        for i in 0..32 {
            assert!((du[i] - q * (q * x[i]).cos()).abs() < 1e-12);
            assert!((d2u[i] + q * q * (q * x[i]).sin()).abs() < 1e-11);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dealiased_product_matches_truncated_convolution() {
        // Direct convolution oracle on a small grid.
        let n = 16;
        let g = grid(n, 2.0 * std::f64::consts::PI);
        let sp = Spectral::new(&g);
        let cutoff = Spectral::dealias_cutoff(n) as i64;
        let mut uh = vec![Complex64::new(0.0, 0.0); n];
        let coeffs = [(1, 0.3, -0.2), (2, -0.5, 0.1), (3, 0.25, 0.4), (5, 0.7, 0.05), (7, 0.1, 0.1)];
        for &(k, re, im) in &coeffs {
            uh[k] = Complex64::new(re, im) * n as f64;
            uh[n - k] = Complex64::new(re, -im) * n as f64;
        }
        let got = sp.advection_hat(&uh);
        for j in 0..n {
            let k = signed_index(j, n);
            let mut conv = Complex64::new(0.0, 0.0);
            if k.abs() <= cutoff {
                for p in -cutoff..=cutoff {
                    let q = k - p;
                    if q.abs() > cutoff {
                        continue;
                    }
                    let a = uh[p.rem_euclid(n as i64) as usize] / n as f64;
                    let b = uh[q.rem_euclid(n as i64) as usize] / n as f64;
                    conv += a * b;
                }
            }
            let expected = -Complex64::new(0.0, k as f64) * 0.5 * conv * n as f64;
            assert!((got[j] - expected).norm() < 1e-12, "mode {k}: {} vs {}", got[j], expected);
        }
    }
}
