use serde::{Deserialize, Serialize};

use crate::error::{DyneError, Result};
use crate::estimate::EstimatorKind;
use crate::phase::PhaseAngle;

use super::{DEFAULT_PULSE_DURATION_US, DEFAULT_STEPS};

/// A flat coherent pulse of amplitude `√N` on normalized time [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub mean_photon_number: f64,
    pub true_phase: PhaseAngle,
    /// Physical pulse length in microseconds. Metadata only.
    pub duration_us: f64,
}

impl PulseParams {
    pub fn new(mean_photon_number: f64, true_phase: PhaseAngle) -> Self {
        PulseParams {
            mean_photon_number,
            true_phase,
            duration_us: DEFAULT_PULSE_DURATION_US,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number >= 0.0) {
            return Err(DyneError::invalid(
                "mean_photon_number",
                format!("must be finite and >= 0, got {}", self.mean_photon_number),
            ));
        }
        if !(self.duration_us.is_finite() && self.duration_us > 0.0) {
            return Err(DyneError::invalid(
                "duration_us",
                format!("must be finite and > 0, got {}", self.duration_us),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Overall detection efficiency η ∈ (0, 1].
    pub efficiency: f64,
    /// Electronic-to-shot noise power ratio r ≥ 0.
    pub electronic_noise_ratio: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            efficiency: 1.0,
            electronic_noise_ratio: 0.0,
        }
    }

    /// Noise model for a detector whose shot noise sits `db` decibels above
    /// the electronic noise floor: r = 10^(−db/10).
    pub fn with_shot_noise_clearance_db(efficiency: f64, db: f64) -> Self {
        NoiseModel {
            efficiency,
            electronic_noise_ratio: 10f64.powf(-db / 10.0),
        }
    }

    /// Photon number of the equivalent ideal-detector pulse, `η·N/(1 + r)`.
    pub fn effective_photon_number(&self, mean_photon_number: f64) -> f64 {
        self.efficiency * mean_photon_number / (1.0 + self.electronic_noise_ratio)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(DyneError::invalid(
                "efficiency",
                format!("must lie in (0, 1], got {}", self.efficiency),
            ));
        }
        if !(self.electronic_noise_ratio.is_finite() && self.electronic_noise_ratio >= 0.0) {
            return Err(DyneError::invalid(
                "electronic_noise_ratio",
                format!(
                    "must be finite and >= 0, got {}",
                    self.electronic_noise_ratio
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLoPhase {
    /// Drawn uniformly on the circle, independently per trajectory.
    Uniform,
    Fixed(PhaseAngle),
}

/// Imperfections of the feedback path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopModel {
    /// Maximum LO phase rate in radians per normalized time; `f64::INFINITY` is unconstrained.
    pub slew_limit: f64,
    /// Whole steps of latency between a command and its application.
    pub delay_steps: usize,
    pub initial_lo_phase: InitialLoPhase,
}

impl Default for LoopModel {
    fn default() -> Self {
        LoopModel::ideal()
    }
}

impl LoopModel {
    pub fn ideal() -> Self {
        LoopModel {
            slew_limit: f64::INFINITY,
            delay_steps: 0,
            initial_lo_phase: InitialLoPhase::Uniform,
        }
    }

    pub fn with_slew_limit(mut self, slew_limit: f64) -> Self {
        self.slew_limit = slew_limit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.slew_limit.is_nan() || self.slew_limit <= 0.0 {
            return Err(DyneError::invalid(
                "slew_limit",
                format!("must be > 0 (infinity allowed), got {}", self.slew_limit),
            ));
        }
        Ok(())
    }
}

/// How the LO phase is chosen over the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Real-time feedback to the quadrature orthogonal to the running estimate.
    AdaptiveDyne,
    /// LO detuned from the signal by `beat_cycles` per pulse.
    Heterodyne { beat_cycles: f64 },
    /// Fixed-quadrature homodyne.
    FixedLo { phase: PhaseAngle },
}

impl PolicyKind {
    /// Estimators evaluated at the end of a trajectory under this policy.
    pub fn estimators(&self) -> &'static [EstimatorKind] {
        match self {
            PolicyKind::AdaptiveDyne | PolicyKind::FixedLo { .. } => {
                &[EstimatorKind::MarkI, EstimatorKind::MarkII]
            }
            PolicyKind::Heterodyne { .. } => &[EstimatorKind::IQ],
        }
    }

    /// The estimator reported as this policy's headline result.
    pub fn headline(&self) -> EstimatorKind {
        match self {
            PolicyKind::AdaptiveDyne => EstimatorKind::MarkII,
            PolicyKind::Heterodyne { .. } => EstimatorKind::IQ,
            PolicyKind::FixedLo { .. } => EstimatorKind::MarkI,
        }
    }

    /// Whether the LO is driven from the photocurrent through the loop model.
    pub fn is_closed_loop(&self) -> bool {
        matches!(self, PolicyKind::AdaptiveDyne)
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::AdaptiveDyne => "adaptive",
            PolicyKind::Heterodyne { .. } => "heterodyne",
            PolicyKind::FixedLo { .. } => "fixed_lo",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PolicyKind::Heterodyne { beat_cycles } = self {
            if !(beat_cycles.is_finite() && *beat_cycles > 0.0) {
                return Err(DyneError::invalid(
                    "beat_cycles",
                    format!("must be finite and > 0, got {beat_cycles}"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything needed to generate one trajectory, apart from the random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub pulse: PulseParams,
    pub noise: NoiseModel,
    pub loop_model: LoopModel,
    pub policy: PolicyKind,
    pub n_steps: usize,
}

impl Simulation {
    pub fn new(pulse: PulseParams, policy: PolicyKind) -> Self {
        Simulation {
            pulse,
            noise: NoiseModel::ideal(),
            loop_model: LoopModel::ideal(),
            policy,
            n_steps: DEFAULT_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.noise.validate()?;
        self.loop_model.validate()?;
        self.policy.validate()?;
        if self.n_steps < 2 {
            return Err(DyneError::invalid(
                "n_steps",
                format!("must be >= 2, got {}", self.n_steps),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }
}
