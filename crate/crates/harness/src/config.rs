//! Experiment configuration: TOML schema, presets and validation.
//!
//! Resolution order, later wins: preset defaults, then keys present in the
//! file, then command-line overrides.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dynelab_core::engine::{
    InitialLoPhase, LoopModel, NoiseModel, PolicyKind, PulseParams, DEFAULT_PULSE_DURATION_US,
    DEFAULT_STEPS,
};
use dynelab_core::stats::EnsembleSpec;
use dynelab_core::{DyneError, PhaseAngle};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::output::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Ideal,
    PaperApparatus,
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Preset::Ideal),
            "paper-apparatus" => Ok(Preset::PaperApparatus),
            other => Err(HarnessError::invalid(
                "preset",
                format!("unknown preset `{other}` (expected ideal or paper-apparatus)"),
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ideal => "ideal",
            Preset::PaperApparatus => "paper-apparatus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRule {
    /// Every ensemble uses `pulse.true_phase`.
    Fixed,
    /// Each ensemble draws its own signal phase uniformly on the circle.
    RandomPerEnsemble,
}

/// How per-ensemble results are combined into one variance per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleWeighting {
    /// Average of the per-ensemble variance estimates.
    PerEnsemble,
    /// One estimate over all trials, each centred on its own ensemble mean.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Adaptive,
    Heterodyne,
    FixedLo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPhaseSetting {
    Named(InitialPhaseName),
    Radians(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPhaseName {
    Uniform,
}

// On-disk schema. Every field is optional so that presets can fill the gaps.

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub ensembles: Option<usize>,
    pub n_steps: Option<usize>,
    pub phase_rule: Option<PhaseRule>,
    pub ensemble_weighting: Option<EnsembleWeighting>,
    pub format: Option<Format>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub pulse: RawPulse,
    #[serde(default)]
    pub noise: RawNoise,
    #[serde(default, rename = "loop")]
    pub loop_model: RawLoop,
    #[serde(default)]
    pub policies: RawPolicies,
    #[serde(default)]
    pub traj: RawTraj,
    #[serde(default)]
    pub dist: RawDist,
    #[serde(default)]
    pub sweep: RawSweep,
    #[serde(default)]
    pub polar: RawPolar,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPulse {
    pub mean_photon_number: Option<f64>,
    pub true_phase: Option<f64>,
    pub duration_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    pub efficiency: Option<f64>,
    pub electronic_noise_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLoop {
    pub slew_limit: Option<f64>,
    pub delay_steps: Option<usize>,
    pub initial_lo_phase: Option<InitialPhaseSetting>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicies {
    pub set: Option<Vec<PolicyName>>,
    pub beat_cycles: Option<f64>,
    pub fixed_lo_phase: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTraj {
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDist {
    pub bins: Option<usize>,
    pub tail_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub photon_numbers: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolar {
    pub phases: Option<usize>,
}

/// Fully resolved and validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    /// Shots per ensemble.
    pub trials: usize,
    pub ensembles: usize,
    pub n_steps: usize,
    pub phase_rule: PhaseRule,
    pub ensemble_weighting: EnsembleWeighting,
    pub format: Format,
    pub output_dir: PathBuf,
    /// Required by traj, dist and polar; sweep uses `photon_numbers` instead.
    pub mean_photon_number: Option<f64>,
    pub true_phase: PhaseAngle,
    pub duration_us: f64,
    pub noise: NoiseModel,
    pub loop_model: LoopModel,
    pub policy_names: Vec<PolicyName>,
    pub beat_cycles: f64,
    pub fixed_lo_phase: PhaseAngle,
    pub traj_count: usize,
    pub dist_bins: usize,
    pub tail_threshold: f64,
    pub photon_numbers: Vec<f64>,
    pub polar_phases: usize,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub format: Option<Format>,
    pub output_dir: Option<PathBuf>,
}

struct PresetDefaults {
    electronic_noise_ratio: f64,
    slew_limit: f64,
    beat_cycles: f64,
    trials: usize,
    ensembles: usize,
}

impl Preset {
    fn defaults(self) -> PresetDefaults {
        match self {
            Preset::Ideal => PresetDefaults {
                electronic_noise_ratio: 0.0,
                slew_limit: f64::INFINITY,
                beat_cycles: 90.0,
                trials: 1000,
                ensembles: 1,
            },
            // Shot noise 6 dB above the electronic floor, 1.5 MHz loop
            // bandwidth and 1.8 MHz detuning over a 50 µs pulse, 150-shot ensembles.
            Preset::PaperApparatus => PresetDefaults {
                electronic_noise_ratio: 10f64.powf(-0.6),
                slew_limit: 75.0,
                beat_cycles: 90.0,
                trials: 150,
                ensembles: 20,
            },
        }
    }
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "dynelab-out";

/// Reads and resolves a TOML config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, overrides)
}

/// Parses and resolves inline TOML text.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, o: &Overrides) -> Result<ExperimentConfig> {
    let preset = o.preset.or(raw.preset).unwrap_or(Preset::Ideal);
    let d = preset.defaults();

    let initial_lo_phase = match raw.loop_model.initial_lo_phase {
        None | Some(InitialPhaseSetting::Named(InitialPhaseName::Uniform)) => {
            InitialLoPhase::Uniform
        }
        Some(InitialPhaseSetting::Radians(x)) => {
            InitialLoPhase::Fixed(phase("loop.initial_lo_phase", x)?)
        }
    };

    let cfg = ExperimentConfig {
        preset,
        seed: o.seed.or(raw.seed).unwrap_or(DEFAULT_SEED),
        trials: o.trials.or(raw.trials).unwrap_or(d.trials),
        ensembles: raw.ensembles.unwrap_or(d.ensembles),
        n_steps: raw.n_steps.unwrap_or(DEFAULT_STEPS),
        phase_rule: raw.phase_rule.unwrap_or(PhaseRule::RandomPerEnsemble),
        ensemble_weighting: raw
            .ensemble_weighting
            .unwrap_or(EnsembleWeighting::PerEnsemble),
        format: o.format.or(raw.format).unwrap_or(Format::Csv),
        output_dir: o
            .output_dir
            .clone()
            .or(raw.output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        mean_photon_number: raw.pulse.mean_photon_number,
        true_phase: phase("pulse.true_phase", raw.pulse.true_phase.unwrap_or(0.0))?,
        duration_us: raw.pulse.duration_us.unwrap_or(DEFAULT_PULSE_DURATION_US),
        noise: NoiseModel {
            efficiency: raw.noise.efficiency.unwrap_or(1.0),
            electronic_noise_ratio: raw
                .noise
                .electronic_noise_ratio
                .unwrap_or(d.electronic_noise_ratio),
        },
        loop_model: LoopModel {
            slew_limit: raw.loop_model.slew_limit.unwrap_or(d.slew_limit),
            delay_steps: raw.loop_model.delay_steps.unwrap_or(0),
            initial_lo_phase,
        },
        policy_names: raw
            .policies
            .set
            .unwrap_or_else(|| vec![PolicyName::Adaptive, PolicyName::Heterodyne]),
        beat_cycles: raw.policies.beat_cycles.unwrap_or(d.beat_cycles),
        fixed_lo_phase: phase(
            "policies.fixed_lo_phase",
            raw.policies.fixed_lo_phase.unwrap_or(PI / 2.0),
        )?,
        traj_count: raw.traj.count.unwrap_or(3),
        dist_bins: raw.dist.bins.unwrap_or(64),
        tail_threshold: raw.dist.tail_threshold.unwrap_or(2.5),
        photon_numbers: raw
            .sweep
            .photon_numbers
            .unwrap_or_else(|| vec![10.0, 50.0, 300.0]),
        polar_phases: raw.polar.phases.unwrap_or(12),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn phase(key: &str, x: f64) -> Result<PhaseAngle> {
    PhaseAngle::new(x).map_err(|e| HarnessError::invalid(key, e.to_string()))
}

/// Maps a core validation field to the config key that feeds it.
fn config_key(field: &str) -> &str {
    match field {
        "mean_photon_number" => "pulse.mean_photon_number",
        "duration_us" => "pulse.duration_us",
        "efficiency" => "noise.efficiency",
        "electronic_noise_ratio" => "noise.electronic_noise_ratio",
        "slew_limit" => "loop.slew_limit",
        "beat_cycles" => "policies.beat_cycles",
        "policies" => "policies.set",
        other => other,
    }
}

fn from_core(err: DyneError) -> HarnessError {
    match err {
        DyneError::InvalidParameter { field, reason } => {
            HarnessError::invalid(config_key(field), reason)
        }
        other => HarnessError::invalid("config", other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(HarnessError::invalid(
                "trials",
                format!("must be >= 2, got {}", self.trials),
            ));
        }
        if self.ensembles < 1 {
            return Err(HarnessError::invalid("ensembles", "must be >= 1"));
        }
        if self.policy_names.is_empty() {
            return Err(HarnessError::invalid(
                "policies.set",
                "at least one policy is required",
            ));
        }
        if self.traj_count < 1 {
            return Err(HarnessError::invalid("traj.count", "must be >= 1"));
        }
        if self.dist_bins < 2 {
            return Err(HarnessError::invalid("dist.bins", "must be >= 2"));
        }
        if !(self.tail_threshold > 0.0 && self.tail_threshold < PI) {
            return Err(HarnessError::invalid(
                "dist.tail_threshold",
                "must lie in (0, π)",
            ));
        }
        if self.polar_phases < 3 {
            return Err(HarnessError::invalid(
                "polar.phases",
                "must be >= 3 for a slope fit",
            ));
        }
        let grid = &self.photon_numbers;
        if grid.is_empty() || grid.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
            return Err(HarnessError::invalid(
                "sweep.photon_numbers",
                "must be a nonempty list of positive numbers",
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::invalid(
                "sweep.photon_numbers",
                "must be strictly increasing",
            ));
        }
        // Component invariants, checked through the core types. A missing
        // photon number is checked per subcommand.
        self.ensemble_spec(self.mean_photon_number.unwrap_or(1.0), self.true_phase)
            .validate()
            .map_err(from_core)
    }

    /// The single photon number used by traj, dist and polar; it must be set and positive.
    pub fn require_photon_number(&self) -> Result<f64> {
        match self.mean_photon_number {
            None => Err(HarnessError::invalid(
                "pulse.mean_photon_number",
                "required for this subcommand",
            )),
            Some(n) if n > 0.0 => Ok(n),
            Some(n) => Err(HarnessError::invalid(
                "pulse.mean_photon_number",
                format!("must be > 0 for this subcommand, got {n}"),
            )),
        }
    }

    pub fn policies(&self) -> Vec<PolicyKind> {
        self.policy_names
            .iter()
            .map(|name| match name {
                PolicyName::Adaptive => PolicyKind::AdaptiveDyne,
                PolicyName::Heterodyne => PolicyKind::Heterodyne {
                    beat_cycles: self.beat_cycles,
                },
                PolicyName::FixedLo => PolicyKind::FixedLo {
                    phase: self.fixed_lo_phase,
                },
            })
            .collect()
    }

    pub fn ensemble_spec(&self, mean_photon_number: f64, true_phase: PhaseAngle) -> EnsembleSpec {
        let mut pulse = PulseParams::new(mean_photon_number, true_phase);
        pulse.duration_us = self.duration_us;
        EnsembleSpec {
            pulse,
            noise: self.noise,
            loop_model: self.loop_model,
            policies: self.policies(),
            n_steps: self.n_steps,
        }
    }

    /// Equally spaced signal phases for the polar study, `2πj/P`, wrapped.
    pub fn polar_grid(&self) -> Vec<f64> {
        (0..self.polar_phases)
            .map(|j| TAU * j as f64 / self.polar_phases as f64)
            .collect()
    }

    /// The config as fully explicit TOML; parsing it back yields the same config.
    pub fn to_toml(&self) -> Result<String> {
        let raw = RawConfig {
            preset: Some(self.preset),
            seed: Some(self.seed),
            trials: Some(self.trials),
            ensembles: Some(self.ensembles),
            n_steps: Some(self.n_steps),
            phase_rule: Some(self.phase_rule),
            ensemble_weighting: Some(self.ensemble_weighting),
            format: Some(self.format),
            output_dir: Some(self.output_dir.clone()),
            pulse: RawPulse {
                mean_photon_number: self.mean_photon_number,
                true_phase: Some(self.true_phase.radians()),
                duration_us: Some(self.duration_us),
            },
            noise: RawNoise {
                efficiency: Some(self.noise.efficiency),
                electronic_noise_ratio: Some(self.noise.electronic_noise_ratio),
            },
            loop_model: RawLoop {
                slew_limit: Some(self.loop_model.slew_limit),
                delay_steps: Some(self.loop_model.delay_steps),
                initial_lo_phase: Some(match self.loop_model.initial_lo_phase {
                    InitialLoPhase::Uniform => {
                        InitialPhaseSetting::Named(InitialPhaseName::Uniform)
                    }
                    InitialLoPhase::Fixed(p) => InitialPhaseSetting::Radians(p.radians()),
                }),
            },
            policies: RawPolicies {
                set: Some(self.policy_names.clone()),
                beat_cycles: Some(self.beat_cycles),
                fixed_lo_phase: Some(self.fixed_lo_phase.radians()),
            },
            traj: RawTraj {
                count: Some(self.traj_count),
            },
            dist: RawDist {
                bins: Some(self.dist_bins),
                tail_threshold: Some(self.tail_threshold),
            },
            sweep: RawSweep {
                photon_numbers: Some(self.photon_numbers.clone()),
            },
            polar: RawPolar {
                phases: Some(self.polar_phases),
            },
        };
        toml::to_string(&raw).map_err(|e| HarnessError::Serialize {
            path: PathBuf::from("<config>"),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, &Overrides::default())
    }

    fn invalid_key(err: HarnessError) -> String {
        match err {
            HarnessError::Invalid { key, .. } => key,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg =
            parse("[pulse]\nmean_photon_number = 50\n[policies]\nset = [\"adaptive\"]\n").unwrap();
        assert_eq!(cfg.mean_photon_number, Some(50.0));
        assert_eq!(cfg.noise.efficiency, 1.0);
        assert_eq!(cfg.noise.electronic_noise_ratio, 0.0);
        assert!(cfg.loop_model.slew_limit.is_infinite());
        assert_eq!(cfg.n_steps, 4096);
        assert_eq!(cfg.policies(), vec![PolicyKind::AdaptiveDyne]);
        assert_eq!(cfg.phase_rule, PhaseRule::RandomPerEnsemble);
        assert_eq!(cfg.loop_model.initial_lo_phase, InitialLoPhase::Uniform);
    }

    #[test]
    fn apparatus_preset() {
        let cfg =
            parse("preset = \"paper-apparatus\"\n[pulse]\nmean_photon_number = 50\n").unwrap();
        assert!((cfg.noise.electronic_noise_ratio - 0.25).abs() < 2e-3);
        assert_eq!(cfg.loop_model.slew_limit, 75.0);
        assert_eq!(cfg.beat_cycles, 90.0);
        assert_eq!(cfg.trials, 150);
        assert_eq!(cfg.duration_us, 50.0);
    }

    #[test]
    fn file_values_beat_preset_and_flags_beat_file() {
        let text =
            "preset = \"paper-apparatus\"\ntrials = 400\nseed = 3\n[loop]\nslew_limit = inf\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.trials, 400);
        assert!(cfg.loop_model.slew_limit.is_infinite());
        let o = Overrides {
            seed: Some(9),
            trials: Some(10),
            preset: Some(Preset::Ideal),
            ..Overrides::default()
        };
        let cfg = parse_config(text, &o).unwrap();
        assert_eq!((cfg.seed, cfg.trials, cfg.preset), (9, 10, Preset::Ideal));
        assert_eq!(cfg.noise.electronic_noise_ratio, 0.0);
    }

    #[test]
    fn negative_photon_number_is_named() {
        let err = parse("[pulse]\nmean_photon_number = -1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert_eq!(invalid_key(err), "pulse.mean_photon_number");
    }

    #[test]
    fn zero_efficiency_is_named() {
        let err = parse("[noise]\nefficiency = 0.0\n").unwrap_err();
        assert_eq!(invalid_key(err), "noise.efficiency");
    }

    #[test]
    fn unknown_keys_and_policies_rejected() {
        let err = parse("[pulse]\nphotons = 3\n").unwrap_err();
        assert!(
            matches!(err, HarnessError::Parse(ref m) if m.contains("photons")),
            "{err}"
        );
        let err = parse("[policies]\nset = [\"homodyne\"]\n").unwrap_err();
        assert!(
            matches!(err, HarnessError::Parse(ref m) if m.contains("homodyne")),
            "{err}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sweep_grid_validated() {
        let err = parse("[sweep]\nphoton_numbers = [50, 10]\n").unwrap_err();
        assert_eq!(invalid_key(err), "sweep.photon_numbers");
    }

    #[test]
    fn initial_phase_setting() {
        let cfg = parse("[loop]\ninitial_lo_phase = 0.5\n").unwrap();
        assert_eq!(
            cfg.loop_model.initial_lo_phase,
            InitialLoPhase::Fixed(PhaseAngle::new(0.5).unwrap())
        );
        let cfg = parse("[loop]\ninitial_lo_phase = \"uniform\"\n").unwrap();
        assert_eq!(cfg.loop_model.initial_lo_phase, InitialLoPhase::Uniform);
        assert!(parse("[loop]\ninitial_lo_phase = \"random\"\n").is_err());
    }

    #[test]
    fn toml_echo_round_trips() {
        let text = "preset = \"paper-apparatus\"\nseed = 77\n[pulse]\nmean_photon_number = 2.5\ntrue_phase = -1.0\n[loop]\ninitial_lo_phase = 0.25\n[policies]\nset = [\"adaptive\", \"fixed_lo\"]\n";
        let cfg = parse(text).unwrap();
        let echo = cfg.to_toml().unwrap();
        let again = parse(&echo).unwrap();
        assert_eq!(cfg, again);

        let ideal = parse("").unwrap();
        assert_eq!(parse(&ideal.to_toml().unwrap()).unwrap(), ideal);
    }

    #[test]
    fn photon_number_required_per_subcommand() {
        let cfg = parse("").unwrap();
        assert!(cfg.require_photon_number().is_err());
        let cfg = parse("[pulse]\nmean_photon_number = 0\n").unwrap();
        assert_eq!(
            invalid_key(cfg.require_photon_number().unwrap_err()),
            "pulse.mean_photon_number"
        );
    }
}
