//! Final phase estimators over a completed (or partial) record.

use serde::{Deserialize, Serialize};

use crate::accum::DyneAccumulators;
use crate::error::{DyneError, Result};
use crate::phase::PhaseAngle;

/// Relative threshold on `|A + B·conj(A)|` below which Mark II declines to estimate.
pub const MARK2_AMBIGUITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Running estimate `arg A`.
    MarkI,
    /// History-corrected estimate `arg(A + B·conj(A))`.
    MarkII,
    /// I/Q demodulation of a heterodyne beat note, `arg A` under a ramped LO.
    IQ,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::MarkI => "mark1",
            EstimatorKind::MarkII => "mark2",
            EstimatorKind::IQ => "iq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub phi_hat: PhaseAngle,
    pub magnitude: f64,
    pub kind: EstimatorKind,
}

fn arg_of_a(acc: &DyneAccumulators, kind: EstimatorKind) -> Result<EstimateResult> {
    let magnitude = acc.a.norm();
    if magnitude == 0.0 {
        return Err(DyneError::AmbiguousEstimate { magnitude });
    }
    Ok(EstimateResult {
        phi_hat: PhaseAngle::from_finite(acc.a.arg()),
        magnitude,
        kind,
    })
}

pub fn estimate_mark1(acc: &DyneAccumulators) -> Result<EstimateResult> {
    arg_of_a(acc, EstimatorKind::MarkI)
}

/// Mark II estimate `arg(A + B·conj(A))`.
///
/// For a noiseless coherent record `A + B·conj(A) = √N e^{iφ}(1 − |B|²)` at
/// the end of the pulse, so the estimate is exact whenever `|B| < 1`. A record
/// taken at a single fixed quadrature has `|B| = 1` and carries no phase
/// direction; it is reported as [`DyneError::AmbiguousEstimate`].
pub fn estimate_mark2(acc: &DyneAccumulators) -> Result<EstimateResult> {
    let z = acc.corrected();
    let magnitude = z.norm();
    if magnitude <= MARK2_AMBIGUITY_TOLERANCE * acc.a.norm().max(1.0) {
        return Err(DyneError::AmbiguousEstimate { magnitude });
    }
    Ok(EstimateResult {
        phi_hat: PhaseAngle::from_finite(z.arg()),
        magnitude,
        kind: EstimatorKind::MarkII,
    })
}

pub fn estimate_iq(acc: &DyneAccumulators) -> Result<EstimateResult> {
    arg_of_a(acc, EstimatorKind::IQ)
}
