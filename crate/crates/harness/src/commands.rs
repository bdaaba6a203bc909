//! The four subcommands and their output tables.
//!
//! Randomness is keyed by position, never by scheduling: ensemble `e` of a
//! run uses master seed `derive_seed(seed, e)`, and trial `i` inside it uses
//! stream `i` of that seed. Changing the worker count therefore changes
//! nothing in the output files.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dynelab_core::engine::{derive_seed, simulate_trajectory, PolicyKind, RngStream, RunOptions};
use dynelab_core::stats::inference::{linear_fit, mean_sd};
use dynelab_core::stats::{
    build_histogram, interquartile_width, reference_curves, run_ensemble, tail_fraction,
    EnsembleStats,
};
use dynelab_core::{EstimatorKind, PhaseAngle};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EnsembleWeighting, ExperimentConfig, PhaseRule, PolicyName};
use crate::error::{HarnessError, Result};
use crate::manifest::{checksum, RunManifest};
use crate::output::{Emitted, Record};

/// Salt separating the signal-phase draws from the per-ensemble seeds.
const PHASE_SALT: u64 = 0x7068_6173_6500_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Traj,
    Dist,
    Sweep,
    Polar,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Traj => "traj",
            Command::Dist => "dist",
            Command::Sweep => "sweep",
            Command::Polar => "polar",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traj" => Ok(Command::Traj),
            "dist" => Ok(Command::Dist),
            "sweep" => Ok(Command::Sweep),
            "polar" => Ok(Command::Polar),
            other => Err(HarnessError::invalid(
                "subcommand",
                format!("unknown subcommand `{other}`"),
            )),
        }
    }
}

// Output tables.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajStep {
    pub policy: String,
    pub trajectory: usize,
    pub step: usize,
    pub time: f64,
    pub lo_phase: f64,
    pub charge: f64,
}

impl Record for TrajStep {
    const FIELDS: &'static [&'static str] =
        &["policy", "trajectory", "step", "time", "lo_phase", "charge"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajEstimate {
    pub policy: String,
    pub trajectory: usize,
    pub estimator: String,
    pub true_phase: f64,
    pub initial_lo_phase: f64,
    pub phi_hat: f64,
    pub error: f64,
    pub ambiguous: bool,
}

impl Record for TrajEstimate {
    const FIELDS: &'static [&'static str] = &[
        "policy",
        "trajectory",
        "estimator",
        "true_phase",
        "initial_lo_phase",
        "phi_hat",
        "error",
        "ambiguous",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistStats {
    #[serde(rename = "N")]
    pub n: f64,
    pub policy: String,
    pub estimator: String,
    pub headline: bool,
    pub trials: usize,
    pub ensembles: usize,
    pub wrapped_variance: f64,
    pub holevo_variance: f64,
    pub stderr: f64,
    pub interquartile_width: f64,
    pub tail_fraction: f64,
    pub ambiguous_count: usize,
    pub het_limit: f64,
    pub fund_limit: f64,
}

impl Record for DistStats {
    const FIELDS: &'static [&'static str] = &[
        "N",
        "policy",
        "estimator",
        "headline",
        "trials",
        "ensembles",
        "wrapped_variance",
        "holevo_variance",
        "stderr",
        "interquartile_width",
        "tail_fraction",
        "ambiguous_count",
        "het_limit",
        "fund_limit",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistBin {
    pub policy: String,
    pub estimator: String,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub density: f64,
}

impl Record for DistBin {
    const FIELDS: &'static [&'static str] = &[
        "policy",
        "estimator",
        "bin",
        "lower",
        "upper",
        "count",
        "density",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: f64,
    pub policy: String,
    pub wrapped_variance: f64,
    pub holevo_variance: f64,
    pub stderr: f64,
    pub het_limit: f64,
    pub fund_limit: f64,
    pub ambiguous_count: usize,
}

impl Record for SweepRecord {
    const FIELDS: &'static [&'static str] = &[
        "N",
        "policy",
        "wrapped_variance",
        "holevo_variance",
        "stderr",
        "het_limit",
        "fund_limit",
        "ambiguous_count",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarRecord {
    pub phase: f64,
    pub adaptive_variance: f64,
    pub adaptive_stderr: f64,
    pub heterodyne_variance: f64,
    pub heterodyne_stderr: f64,
}

impl Record for PolarRecord {
    const FIELDS: &'static [&'static str] = &[
        "phase",
        "adaptive_variance",
        "adaptive_stderr",
        "heterodyne_variance",
        "heterodyne_stderr",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarSummary {
    #[serde(rename = "N")]
    pub n: f64,
    pub phases: usize,
    pub ensembles: usize,
    pub trials: usize,
    /// Least-squares slope of adaptive variance against signal phase.
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub adaptive_mean: f64,
    /// Mean and standard deviation of the heterodyne variance across phases.
    pub heterodyne_band_mean: f64,
    pub heterodyne_band_sd: f64,
}

impl Record for PolarSummary {
    const FIELDS: &'static [&'static str] = &[
        "N",
        "phases",
        "ensembles",
        "trials",
        "slope",
        "slope_stderr",
        "intercept",
        "adaptive_mean",
        "heterodyne_band_mean",
        "heterodyne_band_sd",
    ];
}

// Ensemble aggregation.

/// Per-ensemble results of one (policy, estimator) pair at one operating point.
#[derive(Debug, Clone)]
pub struct Group {
    pub policy: PolicyKind,
    pub estimator: EstimatorKind,
    pub ensembles: Vec<EnsembleStats>,
    /// Every shot's deviation from its own ensemble's circular mean.
    pub deviations: Vec<PhaseAngle>,
}

/// Combined statistics of a [`Group`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combined {
    pub trials: usize,
    pub ensembles: usize,
    pub wrapped_variance: f64,
    pub holevo_variance: f64,
    pub stderr: f64,
    pub ambiguous_count: usize,
}

impl Group {
    pub fn is_headline(&self) -> bool {
        self.policy.headline() == self.estimator
    }

    /// Combines the surviving ensembles; `None` when every one of them failed.
    pub fn combine(&self, weighting: EnsembleWeighting) -> Option<Combined> {
        let first = self.ensembles.first()?;
        let count = self.ensembles.len();
        let ambiguous_count = self.ensembles.iter().map(|s| s.ambiguous_count).sum();
        let (wrapped_variance, holevo_variance, stderr) = match weighting {
            EnsembleWeighting::PerEnsemble if count == 1 => (
                first.wrapped_variance,
                first.holevo_variance,
                first.wrapped_variance_stderr,
            ),
            EnsembleWeighting::PerEnsemble => {
                let wrapped: Vec<f64> = self.ensembles.iter().map(|s| s.wrapped_variance).collect();
                let holevo: Vec<f64> = self.ensembles.iter().map(|s| s.holevo_variance).collect();
                let (mean, sd) = mean_sd(&wrapped);
                (mean, mean_sd(&holevo).0, sd / (count as f64).sqrt())
            }
            EnsembleWeighting::Pooled => {
                let pooled = EnsembleStats::from_phases(&self.deviations, ambiguous_count).ok()?;
                (
                    pooled.wrapped_variance,
                    pooled.holevo_variance,
                    pooled.wrapped_variance_stderr,
                )
            }
        };
        Some(Combined {
            trials: self.deviations.len(),
            ensembles: count,
            wrapped_variance,
            holevo_variance,
            stderr,
            ambiguous_count,
        })
    }
}

/// Signal phase of ensemble `e` under the configured phase rule.
pub fn ensemble_phase(cfg: &ExperimentConfig, e: u64) -> PhaseAngle {
    match cfg.phase_rule {
        PhaseRule::Fixed => cfg.true_phase,
        PhaseRule::RandomPerEnsemble => {
            let x: f64 = RngStream::new(derive_seed(cfg.seed, PHASE_SALT), e)
                .rng()
                .random_range(-PI..PI);
            PhaseAngle::new(x).unwrap_or(PhaseAngle::ZERO)
        }
    }
}

/// Runs `setups` (signal phase, master seed) as separate ensembles at photon
/// number `n`. Statistic failures are appended to `errors` and the affected
/// ensemble is left out of its group.
pub fn run_groups(
    cfg: &ExperimentConfig,
    n: f64,
    setups: &[(PhaseAngle, u64)],
    label: &str,
    errors: &mut Vec<String>,
) -> Result<Vec<Group>> {
    let mut groups: Vec<Group> = Vec::new();
    for (e, &(phase, seed)) in setups.iter().enumerate() {
        let spec = cfg.ensemble_spec(n, phase);
        let report = run_ensemble(&spec, cfg.trials, seed)?;
        if groups.is_empty() {
            groups = report
                .reports
                .iter()
                .map(|r| Group {
                    policy: r.policy,
                    estimator: r.estimator,
                    ensembles: Vec::new(),
                    deviations: Vec::new(),
                })
                .collect();
        }
        for (group, r) in groups.iter_mut().zip(&report.reports) {
            match r.stats() {
                Ok(stats) => {
                    group.deviations.extend(
                        r.shots
                            .phases()
                            .iter()
                            .map(|p| PhaseAngle::new(p.deviation_from(stats.circular_mean)))
                            .collect::<dynelab_core::Result<Vec<_>>>()?,
                    );
                    group.ensembles.push(stats);
                }
                Err(err) => errors.push(format!(
                    "{label}, ensemble {e}, {}/{}: {err}",
                    r.policy.label(),
                    r.estimator.label()
                )),
            }
        }
    }
    Ok(groups)
}

fn ensemble_setups(cfg: &ExperimentConfig) -> Vec<(PhaseAngle, u64)> {
    (0..cfg.ensembles as u64)
        .map(|e| (ensemble_phase(cfg, e), derive_seed(cfg.seed, e)))
        .collect()
}

fn missing(errors: &mut Vec<String>, label: &str, group: &Group) {
    errors.push(format!(
        "{label}, {}/{}: no ensemble produced statistics",
        group.policy.label(),
        group.estimator.label()
    ));
}

// Subcommands.

pub fn traj_records(cfg: &ExperimentConfig) -> Result<(Vec<TrajStep>, Vec<TrajEstimate>)> {
    let n = cfg.require_photon_number()?;
    let mut steps = Vec::new();
    let mut estimates = Vec::new();
    for k in 0..cfg.traj_count {
        let phase = ensemble_phase(cfg, k as u64);
        let spec = cfg.ensemble_spec(n, phase);
        for &policy in &spec.policies {
            let traj = simulate_trajectory(
                &spec.simulation(policy),
                RngStream::new(cfg.seed, k as u64),
                RunOptions::full(),
            )?;
            let rec = &traj.record;
            steps.extend(rec.lo_phase.iter().zip(&rec.photocurrent).enumerate().map(
                |(step, (&lo, &q))| TrajStep {
                    policy: policy.label().to_string(),
                    trajectory: k,
                    step,
                    time: step as f64 * rec.dt,
                    lo_phase: lo,
                    charge: q,
                },
            ));
            estimates.extend(traj.estimates.iter().map(|est| TrajEstimate {
                policy: policy.label().to_string(),
                trajectory: k,
                estimator: est.kind.label().to_string(),
                true_phase: phase.radians(),
                initial_lo_phase: rec.initial_lo_phase.radians(),
                phi_hat: est.phi_hat.radians(),
                error: est.phi_hat.deviation_from(phase),
                ambiguous: est.ambiguous,
            }));
        }
    }
    Ok((steps, estimates))
}

pub fn dist_records(
    cfg: &ExperimentConfig,
    errors: &mut Vec<String>,
) -> Result<(Vec<DistStats>, Vec<DistBin>)> {
    let n = cfg.require_photon_number()?;
    let reference = reference_curves(n, &cfg.noise)?;
    let label = format!("N={n}");
    let groups = run_groups(cfg, n, &ensemble_setups(cfg), &label, errors)?;
    let mut stats = Vec::new();
    let mut bins = Vec::new();
    for group in &groups {
        let Some(c) = group.combine(cfg.ensemble_weighting) else {
            missing(errors, &label, group);
            continue;
        };
        let policy = group.policy.label().to_string();
        let estimator = group.estimator.label().to_string();
        let devs = &group.deviations;
        stats.push(DistStats {
            n,
            policy: policy.clone(),
            estimator: estimator.clone(),
            headline: group.is_headline(),
            trials: c.trials,
            ensembles: c.ensembles,
            wrapped_variance: c.wrapped_variance,
            holevo_variance: c.holevo_variance,
            stderr: c.stderr,
            interquartile_width: interquartile_width(devs, PhaseAngle::ZERO)?,
            tail_fraction: tail_fraction(devs, PhaseAngle::ZERO, cfg.tail_threshold)?,
            ambiguous_count: c.ambiguous_count,
            het_limit: reference.heterodyne_limit,
            fund_limit: reference.fundamental_limit,
        });
        let hist = build_histogram(devs, PhaseAngle::ZERO, cfg.dist_bins)?;
        let densities = hist.densities();
        bins.extend((0..hist.n_bins()).map(|b| DistBin {
            policy: policy.clone(),
            estimator: estimator.clone(),
            bin: b,
            lower: hist.bin_edges[b],
            upper: hist.bin_edges[b + 1],
            count: hist.counts[b],
            density: densities[b],
        }));
    }
    Ok((stats, bins))
}

pub fn sweep_records(cfg: &ExperimentConfig, errors: &mut Vec<String>) -> Result<Vec<SweepRecord>> {
    let setups = ensemble_setups(cfg);
    let mut rows = Vec::new();
    for &n in &cfg.photon_numbers {
        let label = format!("N={n}");
        let reference = reference_curves(n, &cfg.noise)?;
        for group in run_groups(cfg, n, &setups, &label, errors)?
            .iter()
            .filter(|g| g.is_headline())
        {
            let Some(c) = group.combine(cfg.ensemble_weighting) else {
                missing(errors, &label, group);
                continue;
            };
            rows.push(SweepRecord {
                n,
                policy: group.policy.label().to_string(),
                wrapped_variance: c.wrapped_variance,
                holevo_variance: c.holevo_variance,
                stderr: c.stderr,
                het_limit: reference.heterodyne_limit,
                fund_limit: reference.fundamental_limit,
                ambiguous_count: c.ambiguous_count,
            });
        }
    }
    Ok(rows)
}

pub fn polar_records(
    cfg: &ExperimentConfig,
    errors: &mut Vec<String>,
) -> Result<(Vec<PolarRecord>, Option<PolarSummary>)> {
    for needed in [PolicyName::Adaptive, PolicyName::Heterodyne] {
        if !cfg.policy_names.contains(&needed) {
            return Err(HarnessError::invalid(
                "policies.set",
                "polar compares adaptive against heterodyne and needs both",
            ));
        }
    }
    let n = cfg.require_photon_number()?;
    let ensembles = cfg.ensembles as u64;
    let mut rows = Vec::new();
    for (j, &phi) in cfg.polar_grid().iter().enumerate() {
        let phase = PhaseAngle::new(phi)?;
        let setups: Vec<(PhaseAngle, u64)> = (0..ensembles)
            .map(|e| (phase, derive_seed(cfg.seed, j as u64 * ensembles + e)))
            .collect();
        let label = format!("phase={phi}");
        let groups = run_groups(cfg, n, &setups, &label, errors)?;
        let headline = |policy: &str| {
            groups
                .iter()
                .find(|g| g.is_headline() && g.policy.label() == policy)
                .and_then(|g| g.combine(cfg.ensemble_weighting))
        };
        match (headline("adaptive"), headline("heterodyne")) {
            (Some(a), Some(h)) => rows.push(PolarRecord {
                phase: phi,
                adaptive_variance: a.wrapped_variance,
                adaptive_stderr: a.stderr,
                heterodyne_variance: h.wrapped_variance,
                heterodyne_stderr: h.stderr,
            }),
            _ => errors.push(format!("{label}: no usable ensembles, row skipped")),
        }
    }
    if rows.len() < 3 {
        errors.push(format!(
            "only {} usable phases, slope not fitted",
            rows.len()
        ));
        return Ok((rows, None));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.phase).collect();
    let adaptive: Vec<f64> = rows.iter().map(|r| r.adaptive_variance).collect();
    let heterodyne: Vec<f64> = rows.iter().map(|r| r.heterodyne_variance).collect();
    let fit = linear_fit(&x, &adaptive)?;
    let (het_mean, het_sd) = mean_sd(&heterodyne);
    let summary = PolarSummary {
        n,
        phases: rows.len(),
        ensembles: cfg.ensembles,
        trials: cfg.trials,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        adaptive_mean: mean_sd(&adaptive).0,
        heterodyne_band_mean: het_mean,
        heterodyne_band_sd: het_sd,
    };
    Ok((rows, Some(summary)))
}

/// Runs `command` on a pool of `workers` threads, writes its tables and the
/// manifest into the configured output directory, and returns the manifest.
///
/// Ensemble-level failures do not abort the run; they are listed in the
/// manifest's `errors` and the caller decides the exit status.
pub fn run_command(
    command: Command,
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<RunManifest> {
    if workers == 0 {
        return Err(HarnessError::invalid("workers", "must be >= 1"));
    }
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Simulation(dynelab_core::DyneError::Domain(e.to_string())))?;

    let mut errors = Vec::new();
    let emitted = pool.install(|| emit(command, cfg, dir, &mut errors))?;

    let files = emitted
        .files
        .iter()
        .map(|name| checksum(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: command.to_string(),
        seed: cfg.seed,
        workers,
        format: cfg.format,
        config_toml: cfg.to_toml()?,
        files,
        errors,
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}

fn emit(
    command: Command,
    cfg: &ExperimentConfig,
    dir: &Path,
    errors: &mut Vec<String>,
) -> Result<Emitted> {
    let mut out = Emitted::new(dir);
    let format = cfg.format;
    match command {
        Command::Traj => {
            let (steps, estimates) = traj_records(cfg)?;
            out.write("traj_steps", format, &steps)?;
            out.write("traj_estimates", format, &estimates)?;
        }
        Command::Dist => {
            let (stats, bins) = dist_records(cfg, errors)?;
            out.write("dist_stats", format, &stats)?;
            out.write("dist_hist", format, &bins)?;
        }
        Command::Sweep => {
            let rows = sweep_records(cfg, errors)?;
            out.write("sweep", format, &rows)?;
        }
        Command::Polar => {
            let (rows, summary) = polar_records(cfg, errors)?;
            out.write("polar", format, &rows)?;
            let summary: Vec<PolarSummary> = summary.into_iter().collect();
            out.write("polar_summary", format, &summary)?;
        }
    }
    Ok(out)
}
