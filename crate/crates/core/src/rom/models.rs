use nalgebra::{DMatrix, DVector};

use super::{check_slots, RegRomConfig, Relaxation, RomModel};
use crate::error::{RegromError, Result};

/// Plain Galerkin projection.
pub struct GalerkinRom;

impl RomModel for GalerkinRom {
    fn name(&self) -> &'static str {
        "grom"
    }

    fn requires_filter(&self) -> bool {
        false
    }
}

/// Leray regularization: the advecting field is filtered, `C_ikj ā_k a_j`.
pub struct LerayRom;

impl RomModel for LerayRom {
    fn name(&self) -> &'static str {
        "lrom"
    }

    fn advecting(&self, config: &RegRomConfig, a: &[f64], out: &mut [f64]) -> Result<usize> {
        let filtered = config.filter_ref()?.apply_full(a)?;
        out.copy_from_slice(&filtered);
        Ok(1)
    }
}

/// Evolve with the Galerkin step, filter, then relax `(1-χ) w + χ w̄`.
pub struct EfrRom;

impl RomModel for EfrRom {
    fn name(&self) -> &'static str {
        "efr"
    }

    fn uses_chi(&self) -> bool {
        true
    }

    fn validate(&self, config: &RegRomConfig) -> Result<()> {
        check_slots(self.name(), true, true, config)?;
        let chi = config.chi_or_zero();
        if !(0.0..=1.0).contains(&chi) {
            return Err(RegromError::Config(format!("EFR relaxation {chi} not in [0, 1]")));
        }
        Ok(())
    }

    fn post_step(&self, config: &RegRomConfig, w: &mut DVector<f64>) -> Result<usize> {
        let chi = config.chi_or_zero();
        let filtered = config.filter_ref()?.apply(w)?;
        w.zip_apply(&filtered, |x, f| *x = (1.0 - chi) * *x + chi * f);
        Ok(1)
    }
}

/// Time relaxation: `χ(a - ā)` added to the momentum balance.
pub struct TimeRelaxationRom;

impl RomModel for TimeRelaxationRom {
    fn name(&self) -> &'static str {
        "tr"
    }

    fn uses_chi(&self) -> bool {
        true
    }

    fn validate(&self, config: &RegRomConfig) -> Result<()> {
        check_slots(self.name(), true, true, config)?;
        let chi = config.chi_or_zero();
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(RegromError::Config(format!("TR relaxation {chi} must be nonnegative")));
        }
        if config.evolve != super::EvolveScheme::Bdf {
            return Err(RegromError::Config("model 'tr' has no alternative evolve step".into()));
        }
        Ok(())
    }

    fn implicit_term(&self, config: &RegRomConfig) -> Result<Option<DMatrix<f64>>> {
        if config.relaxation != Relaxation::Implicit {
            return Ok(None);
        }
        let filter = config.filter_ref()?;
        let n = filter.n;
        let chi = config.chi_or_zero();
        Ok(Some((DMatrix::identity(n, n) - filter.application_matrix()) * chi))
    }

    fn explicit_term(&self, config: &RegRomConfig, a: &[f64], rhs: &mut [f64]) -> Result<usize> {
        if config.relaxation != Relaxation::Explicit {
            return Ok(0);
        }
        let chi = config.chi_or_zero();
        let a = DVector::from_column_slice(&a[1..]);
        let filtered = config.filter_ref()?.apply(&a)?;
        for ((r, x), f) in rhs.iter_mut().zip(a.iter()).zip(filtered.iter()) {
            *r -= chi * (x - f);
        }
        Ok(1)
    }
}
