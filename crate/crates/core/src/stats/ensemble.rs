use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    simulate_trajectory, LoopModel, NoiseModel, PolicyKind, PulseParams, RngStream, RunOptions,
    Simulation, DEFAULT_STEPS,
};
use crate::error::{DyneError, Result};
use crate::estimate::EstimatorKind;
use crate::phase::PhaseAngle;

use super::circular::{build_histogram, interquartile_width, tail_fraction, Histogram};
use super::summary::{EnsembleStats, ShotEntry, ShotSet};

/// One ensemble: a fixed pulse measured by each policy in turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub pulse: PulseParams,
    pub noise: NoiseModel,
    pub loop_model: LoopModel,
    pub policies: Vec<PolicyKind>,
    pub n_steps: usize,
}

impl EnsembleSpec {
    pub fn new(pulse: PulseParams, policies: Vec<PolicyKind>) -> Self {
        EnsembleSpec {
            pulse,
            noise: NoiseModel::ideal(),
            loop_model: LoopModel::ideal(),
            policies,
            n_steps: DEFAULT_STEPS,
        }
    }

    pub fn simulation(&self, policy: PolicyKind) -> Simulation {
        Simulation {
            pulse: self.pulse,
            noise: self.noise,
            loop_model: self.loop_model,
            policy,
            n_steps: self.n_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(DyneError::invalid(
                "policies",
                "at least one policy is required",
            ));
        }
        self.policies
            .iter()
            .try_for_each(|&p| self.simulation(p).validate())
    }
}

/// The shots of one estimator under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: PolicyKind,
    pub estimator: EstimatorKind,
    pub shots: ShotSet,
}

impl PolicyReport {
    pub fn stats(&self) -> Result<EnsembleStats> {
        EnsembleStats::from_shots(&self.shots)
    }

    /// Histogram of deviations from the sample's circular mean.
    pub fn histogram(&self, n_bins: usize) -> Result<Histogram> {
        let center = self.stats()?.circular_mean;
        build_histogram(&self.shots.phases(), center, n_bins)
    }

    pub fn tail_fraction(&self, threshold: f64) -> Result<f64> {
        tail_fraction(&self.shots.phases(), self.stats()?.circular_mean, threshold)
    }

    pub fn interquartile_width(&self) -> Result<f64> {
        interquartile_width(&self.shots.phases(), self.stats()?.circular_mean)
    }

    /// Wrapped deviations `phi_hat − reference`, in trajectory order.
    pub fn deviations(&self, reference: PhaseAngle) -> Vec<f64> {
        self.shots
            .entries()
            .iter()
            .map(|e| e.phi_hat.deviation_from(reference))
            .collect()
    }

    pub fn is_headline(&self) -> bool {
        self.policy.headline() == self.estimator
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub trials: usize,
    pub master_seed: u64,
    pub reports: Vec<PolicyReport>,
}

impl EnsembleReport {
    /// The headline report of the first policy with the given label.
    pub fn headline(&self, policy_label: &str) -> Option<&PolicyReport> {
        self.reports
            .iter()
            .find(|r| r.policy.label() == policy_label && r.is_headline())
    }

    pub fn find(&self, policy_label: &str, estimator: EstimatorKind) -> Option<&PolicyReport> {
        self.reports
            .iter()
            .find(|r| r.policy.label() == policy_label && r.estimator == estimator)
    }
}

/// Runs `trials` independent shots of every policy in `spec`.
///
/// Trial `i` uses stream `(master_seed, i)` under every policy, so policies
/// see paired noise. Shots are gathered in index order and every statistic is
/// computed from the ordered sample, so the result does not depend on the
/// size of the rayon pool the call runs in.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    trials: usize,
    master_seed: u64,
) -> Result<EnsembleReport> {
    spec.validate()?;
    if trials < 2 {
        return Err(DyneError::invalid(
            "trials",
            format!("must be >= 2, got {trials}"),
        ));
    }
    let sims: Vec<Simulation> = spec.policies.iter().map(|&p| spec.simulation(p)).collect();

    let per_trial: Vec<Vec<Vec<ShotEntry>>> = (0..trials as u64)
        .into_par_iter()
        .map(|index| {
            let stream = RngStream::new(master_seed, index);
            sims.iter()
                .map(|sim| {
                    let traj = simulate_trajectory(sim, stream, RunOptions::default())?;
                    Ok(traj
                        .estimates
                        .iter()
                        .map(|e| ShotEntry {
                            index,
                            phi_hat: e.phi_hat,
                            ambiguous: e.ambiguous,
                        })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for (p, sim) in sims.iter().enumerate() {
        for (e, &estimator) in sim.policy.estimators().iter().enumerate() {
            let entries = per_trial.iter().map(|t| t[p][e]).collect();
            reports.push(PolicyReport {
                policy: sim.policy,
                estimator,
                shots: ShotSet::from_entries(entries)?,
            });
        }
    }
    Ok(EnsembleReport {
        trials,
        master_seed,
        reports,
    })
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(
    spec: &EnsembleSpec,
    trials: usize,
    master_seed: u64,
    workers: usize,
) -> Result<EnsembleReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DyneError::Domain(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_ensemble(spec, trials, master_seed))
}
