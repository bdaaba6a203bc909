//! Stochastic trajectory generation for dyne measurements on a flat coherent pulse.
//!
//! Time is normalized to the pulse length, so every physical rate enters as a
//! dimensionless product with the pulse duration. The balanced photocurrent
//! over a step of length `dt` is
//!
//! ```text
//! I·dt = 2√(ηN)·cos(φ − Φ)·dt + √(1 + r)·dW,     dW ~ Normal(0, dt)
//! ```
//!
//! which is exact (not a linearization) for coherent input states.

mod model;
mod rng;
mod trajectory;

pub use model::{InitialLoPhase, LoopModel, NoiseModel, PolicyKind, PulseParams, Simulation};
pub use rng::{derive_seed, RngStream};
pub use trajectory::{
    apply_actuator, lo_command, photocurrent_increment, simulate_trajectory, RunOptions,
    ShotEstimate, Trajectory, TrajectoryRecord,
};

/// Default Euler–Maruyama resolution per pulse.
pub const DEFAULT_STEPS: usize = 4096;

/// Default physical pulse length, kept as metadata only.
pub const DEFAULT_PULSE_DURATION_US: f64 = 50.0;
