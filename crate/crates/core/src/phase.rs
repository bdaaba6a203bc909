//! Phase arithmetic on the canonical interval (−π, π].

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DyneError, Result};

/// An angle in radians, always held in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub const ZERO: PhaseAngle = PhaseAngle(0.0);
    pub const PI: PhaseAngle = PhaseAngle(PI);

    /// Wraps `radians` onto the canonical interval.
    pub fn new(radians: f64) -> Result<Self> {
        wrap_phase(radians)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Rotates by `delta` radians.
    #[inline]
    pub fn rotate(self, delta: f64) -> Self {
        PhaseAngle(wrap(self.0 + delta))
    }

    /// Signed shortest-arc difference `self − other`, in (−π, π].
    #[inline]
    pub fn deviation_from(self, other: PhaseAngle) -> f64 {
        wrap(self.0 - other.0)
    }

    /// Unit phasor `e^{iθ}` as `(cos θ, sin θ)`.
    #[inline]
    pub fn phasor(self) -> (f64, f64) {
        let (s, c) = self.0.sin_cos();
        (c, s)
    }

    /// Wraps without checking finiteness. Callers must guarantee a finite input.
    #[inline]
    pub(crate) fn from_finite(radians: f64) -> Self {
        debug_assert!(radians.is_finite());
        PhaseAngle(wrap(radians))
    }
}

impl TryFrom<f64> for PhaseAngle {
    type Error = DyneError;

    fn try_from(value: f64) -> Result<Self> {
        wrap_phase(value)
    }
}

impl From<PhaseAngle> for f64 {
    fn from(value: PhaseAngle) -> Self {
        value.0
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Shifts `x` by a multiple of 2π into (−π, π]. Non-finite input is a domain error.
pub fn wrap_phase(x: f64) -> Result<PhaseAngle> {
    if !x.is_finite() {
        return Err(DyneError::Domain(format!(
            "cannot wrap non-finite phase {x}"
        )));
    }
    Ok(PhaseAngle(wrap(x)))
}

/// Infallible wrap for finite inputs; the engine's hot loop uses this directly.
#[inline]
pub fn wrap(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs; that
    // case also lands here and maps to 0.
    if r > PI {
        r - TAU
    } else {
        r
    }
}
