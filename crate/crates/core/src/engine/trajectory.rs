use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::accum::{feedback_phase, DyneAccumulators};
use crate::error::{DyneError, Result};
use crate::estimate::{estimate_iq, estimate_mark1, estimate_mark2, EstimatorKind};
use crate::phase::{wrap, PhaseAngle};

use super::model::{InitialLoPhase, LoopModel, NoiseModel, PolicyKind, PulseParams, Simulation};
use super::rng::RngStream;

/// Charge `I·dt` collected over one step given the shot-noise increment `dw`.
pub fn photocurrent_increment(
    pulse: &PulseParams,
    noise: &NoiseModel,
    lo_phase: PhaseAngle,
    dt: f64,
    dw: f64,
) -> Result<f64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DyneError::Domain(format!(
            "step dt must be positive, got {dt}"
        )));
    }
    let signal = 2.0 * (noise.efficiency * pulse.mean_photon_number).sqrt();
    let relative = pulse.true_phase.radians() - lo_phase.radians();
    Ok(signal * relative.cos() * dt + (1.0 + noise.electronic_noise_ratio).sqrt() * dw)
}

/// Moves the LO from `previous` toward `commanded` along the shorter arc by at
/// most `slew_limit·dt`. An exactly antipodal command moves in the +phase direction.
pub fn apply_actuator(
    commanded: PhaseAngle,
    previous: PhaseAngle,
    loop_model: &LoopModel,
    dt: f64,
) -> PhaseAngle {
    PhaseAngle::from_finite(slew(
        commanded.radians(),
        previous.radians(),
        loop_model.slew_limit * dt,
    ))
}

#[inline]
fn slew(commanded: f64, previous: f64, max_step: f64) -> f64 {
    if max_step.is_infinite() {
        return commanded;
    }
    // wrap() maps a gap of ±π to +π, which is the tie rule.
    let gap = wrap(commanded - previous);
    if gap.abs() <= max_step {
        commanded
    } else {
        wrap(previous + max_step.copysign(gap))
    }
}

/// LO phase the policy asks for at normalized time `t`, given the record so far.
pub fn lo_command(
    policy: &PolicyKind,
    acc: &DyneAccumulators,
    t: f64,
    fallback: PhaseAngle,
) -> PhaseAngle {
    match *policy {
        PolicyKind::AdaptiveDyne => feedback_phase(acc, fallback),
        PolicyKind::Heterodyne { beat_cycles } => fallback.rotate(TAU * beat_cycles * t),
        PolicyKind::FixedLo { phase } => phase,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep the per-step photocurrent and LO phase sequences.
    pub record_full: bool,
    /// Force every shot-noise increment to zero.
    pub noiseless: bool,
}

impl RunOptions {
    pub fn full() -> Self {
        RunOptions {
            record_full: true,
            noiseless: false,
        }
    }

    pub fn noiseless() -> Self {
        RunOptions {
            record_full: true,
            noiseless: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n_steps: usize,
    pub dt: f64,
    pub true_phase: PhaseAngle,
    /// LO phase before the first command; also the fallback for degenerate estimates.
    pub initial_lo_phase: PhaseAngle,
    /// Per-step charges `I_k·dt`; empty unless recorded in full.
    pub photocurrent: Vec<f64>,
    /// Per-step applied LO phases `Φ_k`; empty unless recorded in full.
    pub lo_phase: Vec<f64>,
    pub final_acc: DyneAccumulators,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "step,time,lo_phase,charge";

    /// Writes one line per step: step index, start time of the step, Φ_k in
    /// radians, and the collected charge.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for (k, (phi, q)) in self.lo_phase.iter().zip(&self.photocurrent).enumerate() {
            writeln!(out, "{},{},{},{}", k, k as f64 * self.dt, phi, q)?;
        }
        Ok(())
    }
}

/// A final estimate, with degenerate records flagged rather than dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub kind: EstimatorKind,
    /// The estimate, or the initial LO phase when `ambiguous`.
    pub phi_hat: PhaseAngle,
    pub magnitude: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    pub estimates: Vec<ShotEstimate>,
}

impl Trajectory {
    pub fn estimate(&self, kind: EstimatorKind) -> Option<&ShotEstimate> {
        self.estimates.iter().find(|e| e.kind == kind)
    }
}

/// Runs one pulse through the detector and controller.
///
/// Each step `k`: the actuator applies the command computed `delay_steps + 1`
/// steps earlier (the initial LO phase until one exists), a shot-noise
/// increment is drawn, the charge is accumulated, and the next command is
/// formed from the record through step `k`. Open-loop policies (heterodyne,
/// fixed LO) follow their schedule directly and bypass the loop model.
///
/// The random stream always yields the initial LO phase first, whether or not
/// it is used, so runs differing only in `initial_lo_phase` share a noise path.
pub fn simulate_trajectory(
    sim: &Simulation,
    stream: RngStream,
    options: RunOptions,
) -> Result<Trajectory> {
    sim.validate()?;
    let n = sim.n_steps;
    let dt = sim.dt();
    let sqrt_dt = dt.sqrt();
    let mut rng = stream.rng();

    let drawn: f64 = rng.random_range(-PI..PI);
    let initial = match sim.loop_model.initial_lo_phase {
        InitialLoPhase::Uniform => PhaseAngle::from_finite(drawn),
        InitialLoPhase::Fixed(p) => p,
    };

    let signal = 2.0 * (sim.noise.efficiency * sim.pulse.mean_photon_number).sqrt();
    let (sin_phi, cos_phi) = sim.pulse.true_phase.radians().sin_cos();
    let noise_scale = (1.0 + sim.noise.electronic_noise_ratio).sqrt();
    let max_step = sim.loop_model.slew_limit * dt;
    let delay = sim.loop_model.delay_steps;
    let closed_loop = sim.policy.is_closed_loop();

    let mut photocurrent = Vec::new();
    let mut lo_trace = Vec::new();
    if options.record_full {
        photocurrent.reserve_exact(n);
        lo_trace.reserve_exact(n);
    }

    let mut acc = DyneAccumulators::new();
    let mut pending: VecDeque<f64> = VecDeque::with_capacity(delay + 1);
    let mut lo = initial.radians();

    for k in 0..n {
        if closed_loop {
            let target = if pending.len() > delay {
                pending.pop_front().unwrap_or(lo)
            } else {
                initial.radians()
            };
            lo = slew(target, lo, max_step);
        } else {
            lo = lo_command(&sim.policy, &acc, k as f64 * dt, initial).radians();
        }

        let dw = if options.noiseless {
            0.0
        } else {
            sqrt_dt * rng.sample::<f64, _>(StandardNormal)
        };
        let (s, c) = lo.sin_cos();
        // cos(φ − Φ) = cos φ cos Φ + sin φ sin Φ
        let charge = signal * (cos_phi * c + sin_phi * s) * dt + noise_scale * dw;
        acc = acc.step_unchecked(charge, (c, s), dt);

        if options.record_full {
            photocurrent.push(charge);
            lo_trace.push(lo);
        }
        if closed_loop {
            let t = (k + 1) as f64 * dt;
            pending.push_back(lo_command(&sim.policy, &acc, t, initial).radians());
        }
    }

    if !acc.a.re.is_finite() || !acc.a.im.is_finite() {
        return Err(DyneError::Domain(
            "accumulator left the finite range".into(),
        ));
    }

    let estimates = sim
        .policy
        .estimators()
        .iter()
        .map(|&kind| {
            let result = match kind {
                EstimatorKind::MarkI => estimate_mark1(&acc),
                EstimatorKind::MarkII => estimate_mark2(&acc),
                EstimatorKind::IQ => estimate_iq(&acc),
            };
            match result {
                Ok(r) => ShotEstimate {
                    kind,
                    phi_hat: r.phi_hat,
                    magnitude: r.magnitude,
                    ambiguous: false,
                },
                Err(DyneError::AmbiguousEstimate { magnitude }) => ShotEstimate {
                    kind,
                    phi_hat: initial,
                    magnitude,
                    ambiguous: true,
                },
                Err(e) => unreachable!("estimators only fail as ambiguous: {e}"),
            }
        })
        .collect();

    Ok(Trajectory {
        record: TrajectoryRecord {
            n_steps: n,
            dt,
            true_phase: sim.pulse.true_phase,
            initial_lo_phase: initial,
            photocurrent,
            lo_phase: lo_trace,
            final_acc: acc,
        },
        estimates,
    })
}
