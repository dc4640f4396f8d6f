//! One-dimensional Gauss–Lobatto–Legendre spectral elements on `[0, 1]`, used to
//! study the higher-order algebraic filter outside the POD setting.
//!
//! The filter solves `(I + δ^{2m} (B⁻¹A)^m) ū = u`. With the diagonal mass `B` and
//! `S = B^{-1/2} A B^{-1/2}` this is `ū = B^{-1/2} (I + δ^{2m} S^m)^{-1} B^{1/2} u`,
//! evaluated through the eigendecomposition of `S` so that high orders stay accurate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{RegromError, Result};
use crate::linalg::symmetrize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Homogeneous Dirichlet: the two boundary nodes are eliminated.
    Dirichlet0,
    /// The node at 1 is identified with the node at 0.
    Periodic,
    /// No elimination (pure Neumann).
    Natural,
}

impl Boundary {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dirichlet0" => Ok(Boundary::Dirichlet0),
            "periodic" => Ok(Boundary::Periodic),
            "natural" | "neumann" => Ok(Boundary::Natural),
            _ => Err(RegromError::Config(format!("unknown boundary '{s}'"))),
        }
    }
}

/// Legendre polynomial `P_p(x)` and its derivative.
fn legendre(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        let d2 = d0 + (2.0 * kf - 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// GLL nodes (ascending, on `[-1, 1]`) and weights for polynomial order `p`.
pub fn gll(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x: Vec<f64> = (0..=p)
        .map(|j| -(std::f64::consts::PI * j as f64 / p as f64).cos())
        .collect();
    // Newton on the interior roots of P_p', i.e. on (1 - x²) P_p'(x).
    for xi in x.iter_mut().take(p).skip(1) {
        for _ in 0..100 {
            let (lp, dp) = legendre(p, *xi);
            let pf = p as f64;
            // P_p'' from the Legendre equation.
            let ddp = (2.0 * *xi * dp - pf * (pf + 1.0) * lp) / (1.0 - *xi * *xi);
            let step = dp / ddp;
            *xi -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[p] = 1.0;
    let pf = p as f64;
    let w = x
        .iter()
        .map(|&xi| {
            let (lp, _) = legendre(p, xi);
            2.0 / (pf * (pf + 1.0) * lp * lp)
        })
        .collect();
    (x, w)
}

/// Nodal differentiation matrix on the GLL points.
pub fn gll_derivative(x: &[f64]) -> DMatrix<f64> {
    let p = x.len() - 1;
    let pf = p as f64;
    let lp: Vec<f64> = x.iter().map(|&xi| legendre(p, xi).0).collect();
    DMatrix::from_fn(p + 1, p + 1, |i, j| {
        if i != j {
            lp[i] / (lp[j] * (x[i] - x[j]))
        } else if i == 0 {
            -pf * (pf + 1.0) / 4.0
        } else if i == p {
            pf * (pf + 1.0) / 4.0
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug)]
pub struct Sem1dSpace {
    pub n_elements: usize,
    pub poly_order: usize,
    pub boundary: Boundary,
    /// Coordinates of the retained degrees of freedom.
    pub nodes: Vec<f64>,
    /// Diagonal of the mass matrix.
    pub mass: DVector<f64>,
    pub stiffness: DMatrix<f64>,
}

impl Sem1dSpace {
    pub fn global_node_count(&self) -> usize {
        self.n_elements * self.poly_order + 1
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.mass)
    }
}

pub fn assemble_sem1d(n_elements: usize, poly_order: usize, boundary: Boundary) -> Result<Sem1dSpace> {
    if n_elements == 0 || poly_order < 2 {
        return Err(RegromError::Config(format!(
            "need at least 1 element and order 2, got {n_elements} elements of order {poly_order}"
        )));
    }
    let p = poly_order;
    let (xi, w) = gll(p);
    let d = gll_derivative(&xi);
    let h = 1.0 / n_elements as f64;
    let wd = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
    let local_k = d.transpose() * wd * &d * (2.0 / h);

    let total = n_elements * p + 1;
    let mut mass = DVector::zeros(total);
    let mut stiff = DMatrix::zeros(total, total);
    let mut coords = vec![0.0; total];
    for e in 0..n_elements {
        let x0 = e as f64 * h;
        for a in 0..=p {
            let ga = e * p + a;
            coords[ga] = x0 + 0.5 * h * (xi[a] + 1.0);
            mass[ga] += 0.5 * h * w[a];
            for b in 0..=p {
                stiff[(ga, e * p + b)] += local_k[(a, b)];
            }
        }
    }
    coords[total - 1] = 1.0;

    let (nodes, mass, stiffness) = match boundary {
        Boundary::Natural => (coords, mass, stiff),
        Boundary::Dirichlet0 => {
            let keep = total - 2;
            (
                coords[1..total - 1].to_vec(),
                mass.rows(1, keep).into_owned(),
                stiff.view((1, 1), (keep, keep)).into_owned(),
            )
        }
        Boundary::Periodic => {
            let m = total - 1;
            let fold = |i: usize| if i == m { 0 } else { i };
            let mut k = DMatrix::zeros(m, m);
            let mut b = DVector::zeros(m);
            for i in 0..total {
                b[fold(i)] += mass[i];
                for j in 0..total {
                    k[(fold(i), fold(j))] += stiff[(i, j)];
                }
            }
            (coords[..m].to_vec(), b, k)
        }
    };
    Ok(Sem1dSpace {
        n_elements,
        poly_order,
        boundary,
        nodes,
        mass,
        stiffness: symmetrize(&stiffness),
    })
}

/// Eigendecomposition of `S = B^{-1/2} A B^{-1/2}`, reusable across `(δ, m)`.
pub struct SemHoaf {
    sqrt_mass: DVector<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SemHoaf {
    pub fn new(space: &Sem1dSpace) -> Self {
        let sqrt_mass = space.mass.map(f64::sqrt);
        let s = DMatrix::from_fn(space.n_dofs(), space.n_dofs(), |i, j| {
            space.stiffness[(i, j)] / (sqrt_mass[i] * sqrt_mass[j])
        });
        let eig = SymmetricEigen::new(symmetrize(&s));
        Self { sqrt_mass, eigenvalues: eig.eigenvalues.map(|l| l.max(0.0)), eigenvectors: eig.eigenvectors }
    }

    /// `B^{-1/2} A B^{-1/2}`, symmetrized.
    pub fn similar_stiffness(space: &Sem1dSpace) -> DMatrix<f64> {
        let sm = space.mass.map(f64::sqrt);
        symmetrize(&DMatrix::from_fn(space.n_dofs(), space.n_dofs(), |i, j| {
            space.stiffness[(i, j)] / (sm[i] * sm[j])
        }))
    }

    pub fn apply(&self, u: &DVector<f64>, delta: f64, m: u32) -> Result<DVector<f64>> {
        if u.len() != self.sqrt_mass.len() {
            return Err(RegromError::Dimension { context: "nodal field", expected: self.sqrt_mass.len(), actual: u.len() });
        }
        if !(1..=4).contains(&m) || !(delta >= 0.0 && delta.is_finite()) {
            return Err(RegromError::Config(format!("invalid filter parameters delta={delta}, m={m}")));
        }
        let scale = delta.powi(2 * m as i32);
        let y = u.component_mul(&self.sqrt_mass);
        let mut c = self.eigenvectors.tr_mul(&y);
        for (ci, &l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci /= 1.0 + scale * l.powi(m as i32);
        }
        Ok((&self.eigenvectors * c).component_div(&self.sqrt_mass))
    }
}

pub fn sem_hoaf_apply(space: &Sem1dSpace, u: &DVector<f64>, delta: f64, m: u32) -> Result<DVector<f64>> {
    SemHoaf::new(space).apply(u, delta, m)
}

/// Mass-weighted least-squares amplitudes of `u` on the given functions, and the
/// relative residual `‖u − fit‖_B / ‖u‖_B`.
pub fn fit_amplitudes(space: &Sem1dSpace, u: &DVector<f64>, basis: &[&dyn Fn(f64) -> f64]) -> Result<(Vec<f64>, f64)> {
    let n = space.n_dofs();
    let g = DMatrix::from_fn(n, basis.len(), |i, j| basis[j](space.nodes[i]));
    let sw = space.mass.map(f64::sqrt);
    let mut gw = g.clone();
    for (r, &s) in sw.iter().enumerate() {
        gw.row_mut(r).scale_mut(s);
    }
    let uw = u.component_mul(&sw);
    let normal = gw.tr_mul(&gw);
    let coeffs = normal
        .cholesky()
        .ok_or_else(|| RegromError::Factorization("amplitude fit is singular".into()))?
        .solve(&gw.tr_mul(&uw));
    let resid = (&uw - &gw * &coeffs).norm();
    let scale = uw.norm();
    let rel = if scale > 0.0 { resid / scale } else { 0.0 };
    Ok((coeffs.iter().copied().collect(), rel))
}

/// Rows of the filter-study table: node coordinate, input and one output per order.
#[derive(Clone, Debug)]
pub struct FilterStudy {
    pub x: Vec<f64>,
    pub input: Vec<f64>,
    pub orders: Vec<u32>,
    pub outputs: Vec<Vec<f64>>,
    /// `amplitude_ratios[i][j]`: output over input amplitude of sine `j` at order `orders[i]`.
    pub amplitude_ratios: Vec<Vec<f64>>,
    pub fit_residuals: Vec<f64>,
}

/// Wavenumbers `k` of the `sin(kπx)` components of the study input.
pub const STUDY_WAVENUMBERS: [f64; 3] = [2.0, 10.0, 20.0];
pub const STUDY_AMPLITUDES: [f64; 3] = [0.5, 0.5, 2.0];

pub fn study_input(x: f64) -> f64 {
    STUDY_WAVENUMBERS
        .iter()
        .zip(STUDY_AMPLITUDES)
        .map(|(k, a)| a * (k * std::f64::consts::PI * x).sin())
        .sum()
}

pub fn filter_study(space: &Sem1dSpace, delta: f64, orders: &[u32]) -> Result<FilterStudy> {
    let hoaf = SemHoaf::new(space);
    let u = DVector::from_iterator(space.n_dofs(), space.nodes.iter().map(|&x| study_input(x)));
    let sines: Vec<Box<dyn Fn(f64) -> f64>> = STUDY_WAVENUMBERS
        .iter()
        .map(|&k| Box::new(move |x: f64| (k * std::f64::consts::PI * x).sin()) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = sines.iter().map(|b| b.as_ref()).collect();
    let mut outputs = Vec::new();
    let mut ratios = Vec::new();
    let mut residuals = Vec::new();
    for &m in orders {
        let out = hoaf.apply(&u, delta, m)?;
        let (amps, resid) = fit_amplitudes(space, &out, &refs)?;
        ratios.push(amps.iter().zip(STUDY_AMPLITUDES).map(|(a, b)| a / b).collect());
        residuals.push(resid);
        outputs.push(out.iter().copied().collect());
    }
    Ok(FilterStudy {
        x: space.nodes.clone(),
        input: u.iter().copied().collect(),
        orders: orders.to_vec(),
        outputs,
        amplitude_ratios: ratios,
        fit_residuals: residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterOperator;

    #[test]
    fn gll_order_two() {
        let (x, w) = gll(2);
        assert_eq!(x, vec![-1.0, 0.0, 1.0]);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gll_integrates_degree_2p_minus_1() {
        let p = 7;
        let (x, w) = gll(p);
        for deg in 0..2 * p {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn derivative_exact_on_polynomials() {
        let (x, _) = gll(6);
        let d = gll_derivative(&x);
        let f = DVector::from_iterator(7, x.iter().map(|&x| x.powi(5) - 2.0 * x));
        let df = &d * f;
        for (i, &xi) in x.iter().enumerate() {
            assert!((df[i] - (5.0 * xi.powi(4) - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_of_unity_and_sizes() {
        let s = assemble_sem1d(1, 2, Boundary::Natural).unwrap();
        assert!((s.mass.sum() - 1.0).abs() < 1e-14);
        let s = assemble_sem1d(64, 7, Boundary::Dirichlet0).unwrap();
        assert_eq!(s.global_node_count(), 449);
        assert_eq!(s.n_dofs(), 447);
        assert_eq!(assemble_sem1d(64, 7, Boundary::Periodic).unwrap().n_dofs(), 448);
        assert!(assemble_sem1d(0, 7, Boundary::Natural).is_err());
        assert!(assemble_sem1d(3, 1, Boundary::Natural).is_err());
    }

    #[test]
    fn stiffness_energy_of_linear_function() {
        let s = assemble_sem1d(5, 4, Boundary::Natural).unwrap();
        let u = DVector::from_vec(s.nodes.clone());
        assert!(((u.transpose() * &s.stiffness * &u)[0] - 1.0).abs() < 1e-12);
        let ones = DVector::from_element(s.n_dofs(), 1.0);
        assert!((&s.stiffness * ones).amax() < 1e-11);
    }

    #[test]
    fn zero_radius_is_identity_and_m1_matches_generic_filter() {
        let s = assemble_sem1d(8, 5, Boundary::Dirichlet0).unwrap();
        let u = DVector::from_iterator(s.n_dofs(), s.nodes.iter().map(|&x| study_input(x)));
        let h = SemHoaf::new(&s);
        assert!((h.apply(&u, 0.0, 3).unwrap() - &u).amax() < 1e-13 * u.amax().max(1.0));

        let delta = 0.05;
        let sm = s.mass.map(f64::sqrt);
        let generic = FilterOperator::from_stiffness(&SemHoaf::similar_stiffness(&s), delta, 1).unwrap();
        let via_generic = generic.apply(&u.component_mul(&sm)).unwrap().component_div(&sm);
        let via_eig = h.apply(&u, delta, 1).unwrap();
        assert!((via_generic - via_eig).amax() < 1e-12 * u.amax());
    }
}
