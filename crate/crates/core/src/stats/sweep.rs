use serde::{Deserialize, Serialize};

use crate::engine::{NoiseModel, PolicyKind};
use crate::error::{DyneError, Result};
use crate::estimate::EstimatorKind;

use super::ensemble::{run_ensemble, EnsembleSpec};
use super::summary::EnsembleStats;

/// Large-N asymptotic variance limits for a coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurves {
    /// Ideal heterodyne, `1/(2·N_eff)`.
    pub heterodyne_limit: f64,
    /// Intrinsic coherent-state phase uncertainty, `1/(4·N_eff)`.
    pub fundamental_limit: f64,
}

/// Reference variances at photon number `n` seen through `noise`
/// (`N_eff = η·N/(1 + r)`). Valid asymptotically in large N.
pub fn reference_curves(n: f64, noise: &NoiseModel) -> Result<ReferenceCurves> {
    if !(n.is_finite() && n > 0.0) {
        return Err(DyneError::Domain(format!(
            "photon number must be positive, got {n}"
        )));
    }
    noise.validate()?;
    let n_eff = noise.effective_photon_number(n);
    Ok(ReferenceCurves {
        heterodyne_limit: 1.0 / (2.0 * n_eff),
        fundamental_limit: 1.0 / (4.0 * n_eff),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub policy: PolicyKind,
    pub estimator: EstimatorKind,
    pub stats: EnsembleStats,
}

/// Headline statistics of every policy at one photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mean_photon_number: f64,
    pub points: Vec<SweepPoint>,
    pub reference: ReferenceCurves,
}

impl SweepRow {
    pub fn point(&self, policy_label: &str) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.policy.label() == policy_label)
    }
}

/// Runs one ensemble per photon number in `n_grid` with the same master seed.
///
/// The grid itself is validated up front; a failure at one photon number is
/// returned in that row's slot and does not stop the others.
pub fn sweep_photon_number(
    base: &EnsembleSpec,
    n_grid: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<Result<SweepRow>>> {
    if n_grid.is_empty() {
        return Err(DyneError::invalid("photon_numbers", "grid is empty"));
    }
    if n_grid.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
        return Err(DyneError::invalid(
            "photon_numbers",
            "entries must be finite and > 0",
        ));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DyneError::invalid(
            "photon_numbers",
            "grid must be strictly increasing",
        ));
    }
    Ok(n_grid
        .iter()
        .map(|&n| {
            let mut spec = base.clone();
            spec.pulse.mean_photon_number = n;
            let report = run_ensemble(&spec, trials, master_seed)?;
            let points = report
                .reports
                .iter()
                .filter(|r| r.is_headline())
                .map(|r| {
                    Ok(SweepPoint {
                        policy: r.policy,
                        estimator: r.estimator,
                        stats: r.stats()?,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(SweepRow {
                mean_photon_number: n,
                points,
                reference: reference_curves(n, &spec.noise)?,
            })
        })
        .collect())
}
