//! Single-shot optical phase estimation on weak coherent pulses.
//!
//! The crate is split into three layers:
//!
//! * [`phase`], [`accum`] and [`estimate`]: the deterministic mathematics of a
//!   dyne record. A record is summarised by the accumulator pair
//!   `A = ∫ I(s) e^{iΦ(s)} ds` and `B = -∫ e^{2iΦ(s)} ds`, from which the
//!   adaptive feedback phase and the Mark I / Mark II / I-Q estimates follow.
//! * [`engine`]: an Euler–Maruyama trajectory generator that draws shot noise
//!   and electronic noise, drives the local oscillator through a rate-limited
//!   actuator and closes the feedback loop.
//! * [`stats`]: circular statistics, ensembles, photon-number sweeps and the
//!   significance tests used to compare measurement schemes.

pub mod accum;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod phase;
pub mod stats;

pub use accum::{accumulate_step, feedback_phase, DyneAccumulators};
pub use error::{DyneError, Result};
pub use estimate::{estimate_iq, estimate_mark1, estimate_mark2, EstimateResult, EstimatorKind};
pub use phase::{wrap_phase, PhaseAngle};
