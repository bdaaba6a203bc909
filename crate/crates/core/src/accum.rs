//! Running sufficient statistics of a dyne record.
//!
//! For a photocurrent `I(t)` measured with local-oscillator phase `Φ(t)`:
//!
//! ```text
//! A_t =  ∫₀ᵗ I(s) e^{iΦ(s)} ds
//! B_t = −∫₀ᵗ e^{2iΦ(s)} ds
//! ```
//!
//! `arg A_t` is the running phase estimate whose integrand is the photocurrent
//! weighted by a time-dependent gain; `B` records the LO history needed to
//! remove the conjugate-phasor contamination from `A` at the end of the pulse.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DyneError, Result};
use crate::phase::PhaseAngle;

/// Slack allowed on `elapsed` beyond the normalized pulse end.
pub const ELAPSED_TOLERANCE: f64 = 1e-9;

/// Complex carrier for the accumulators.
pub type ComplexAmplitude = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DyneAccumulators {
    pub a: ComplexAmplitude,
    pub b: ComplexAmplitude,
    /// Normalized time integrated so far, in [0, 1].
    pub elapsed: f64,
}

impl DyneAccumulators {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one Euler step: `charge` is `I·dt`, the LO phase is held over the step.
    pub fn step(&self, charge: f64, lo_phase: PhaseAngle, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DyneError::Domain(format!(
                "step dt must be positive, got {dt}"
            )));
        }
        if !charge.is_finite() {
            return Err(DyneError::Domain(format!(
                "charge must be finite, got {charge}"
            )));
        }
        let elapsed = self.elapsed + dt;
        if elapsed > 1.0 + ELAPSED_TOLERANCE {
            return Err(DyneError::Domain(format!(
                "elapsed time {elapsed} exceeds the normalized pulse length"
            )));
        }
        Ok(self.step_unchecked(charge, lo_phase.phasor(), dt))
    }

    /// Step with a precomputed LO phasor `(cos Φ, sin Φ)`.
    #[inline]
    pub(crate) fn step_unchecked(&self, charge: f64, (c, s): (f64, f64), dt: f64) -> Self {
        let lo = Complex64::new(c, s);
        let lo2 = Complex64::new(c * c - s * s, 2.0 * c * s);
        DyneAccumulators {
            a: self.a + lo * charge,
            b: self.b - lo2 * dt,
            elapsed: self.elapsed + dt,
        }
    }

    /// `A + B·conj(A)`, the history-corrected phasor behind the Mark II estimate.
    pub fn corrected(&self) -> Complex64 {
        self.a + self.b * self.a.conj()
    }
}

/// Free-function form of [`DyneAccumulators::step`].
pub fn accumulate_step(
    acc: &DyneAccumulators,
    charge: f64,
    lo_phase: PhaseAngle,
    dt: f64,
) -> Result<DyneAccumulators> {
    acc.step(charge, lo_phase, dt)
}

/// Adaptive LO setting: the quadrature orthogonal to the running estimate,
/// `arg A + π/2`. Returns `fallback` while `A` is exactly zero.
pub fn feedback_phase(acc: &DyneAccumulators, fallback: PhaseAngle) -> PhaseAngle {
    if acc.a.re == 0.0 && acc.a.im == 0.0 {
        fallback
    } else {
        PhaseAngle::from_finite(acc.a.arg() + FRAC_PI_2)
    }
}
