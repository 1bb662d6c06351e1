//! Experiment configuration files.
//!
//! Configs are TOML. Every physical quantity carries its unit in the key
//! name; angles are given in degrees and converted at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stepfreq_core::estimator::{DecoupledConfig, LambdaPolicy, SolveOptions, StageConfig};
use stepfreq_core::scene::deg_to_rad;
use stepfreq_core::sensing::{uniform_axis, DEFAULT_ENTRY_BUDGET};
use stepfreq_core::solver::{DantzigOptions, DetectionPolicy};
use stepfreq_core::waveform::StepMode;

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub jammers: Vec<JammerSpec>,
    pub waveform: WaveformSpec,
    pub schedule: ScheduleSpec,
    pub grid: GridSpec,
    pub estimator: EstimatorSpec,
    pub experiment: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub num_tx: usize,
    pub num_rx: usize,
    /// Rows `M` of each receiver's compression matrix.
    pub compressed_len: usize,
    pub disk_radius_m: f64,
    pub carrier_hz: f64,
    pub snr_db: f64,
    #[serde(default = "default_far_field")]
    pub far_field_factor: f64,
}

fn default_far_field() -> f64 {
    stepfreq_core::scene::DEFAULT_FAR_FIELD_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub azimuth_deg: f64,
    pub speed_mps: f64,
    pub range_m: f64,
    #[serde(default = "one")]
    pub reflection_re: f64,
    #[serde(default)]
    pub reflection_im: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerSpec {
    pub azimuth_deg: f64,
    pub range_m: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec {
    pub samples_per_pulse: usize,
    pub symbol_interval_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Constant,
    Linear,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub pulse_interval_s: f64,
    /// Constant-carrier pulses sent first.
    #[serde(default)]
    pub constant_pulses: usize,
    /// Pulses whose carrier follows `step_mode`.
    #[serde(default)]
    pub stepped_pulses: usize,
    pub step_mode: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_max: Option<f64>,
}

impl ScheduleSpec {
    pub fn mode(&self) -> Result<StepMode, HarnessError> {
        let missing =
            |k: &str| HarnessError::Config(format!("schedule.{k} is required for step_mode {:?}", self.step_mode));
        Ok(match self.step_mode {
            StepKind::Constant => StepMode::Constant,
            StepKind::Linear => StepMode::Linear {
                step: self.linear_step.ok_or_else(|| missing("linear_step"))?,
            },
            StepKind::Random => StepMode::Random {
                min: self.step_min.ok_or_else(|| missing("step_min"))?,
                max: self.step_max.ok_or_else(|| missing("step_max"))?,
            },
        })
    }

    pub fn pulse_count(&self) -> usize {
        self.constant_pulses + self.stepped_pulses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub angle_start_deg: f64,
    pub angle_step_deg: f64,
    pub angle_count: usize,
    pub velocity_start_mps: f64,
    pub velocity_step_mps: f64,
    pub velocity_count: usize,
    pub range_start_m: f64,
    pub range_step_m: f64,
    pub range_count: usize,
}

impl GridSpec {
    pub fn angles_rad(&self) -> Vec<f64> {
        uniform_axis(self.angle_start_deg, self.angle_step_deg, self.angle_count)
            .into_iter()
            .map(deg_to_rad)
            .collect()
    }

    pub fn velocities(&self) -> Vec<f64> {
        uniform_axis(self.velocity_start_mps, self.velocity_step_mps, self.velocity_count)
    }

    pub fn ranges(&self) -> Vec<f64> {
        uniform_axis(self.range_start_m, self.range_step_m, self.range_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Joint,
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum LambdaSpec {
    Noise { kappa: f64 },
    Relative { fraction: f64 },
    Fixed { value: f64 },
}

impl From<LambdaSpec> for LambdaPolicy {
    fn from(s: LambdaSpec) -> Self {
        match s {
            LambdaSpec::Noise { kappa } => LambdaPolicy::Noise { kappa },
            LambdaSpec::Relative { fraction } => LambdaPolicy::Relative { fraction },
            LambdaSpec::Fixed { value } => LambdaPolicy::Fixed(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum DetectionSpec {
    Threshold { fraction: f64 },
    Topk { k: usize },
}

impl From<DetectionSpec> for DetectionPolicy {
    fn from(s: DetectionSpec) -> Self {
        match s {
            DetectionSpec::Threshold { fraction } => DetectionPolicy::Threshold { fraction },
            DetectionSpec::Topk { k } => DetectionPolicy::TopK { k },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub lambda: LambdaSpec,
    pub detection: DetectionSpec,
}

impl From<StageSpec> for StageConfig {
    fn from(s: StageSpec) -> Self {
        StageConfig {
            lambda: s.lambda.into(),
            detection: s.detection.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub mode: EstimatorMode,
    /// Decoupled: single-pulse angle solves. Defaults to the first and last
    /// constant-carrier pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step1_pulses: Option<Vec<usize>>,
    #[serde(default = "yes")]
    pub fold_velocity: bool,
    #[serde(default = "default_sides")]
    pub polygon_sides: usize,
    #[serde(default = "default_budget")]
    pub entry_budget: usize,
    /// Joint mode uses the first entry; decoupled uses angle, velocity, range.
    pub stages: Vec<StageSpec>,
}

fn yes() -> bool {
    true
}

fn default_sides() -> usize {
    DantzigOptions::default().polygon_sides
}

fn default_budget() -> usize {
    DEFAULT_ENTRY_BUDGET
}

impl EstimatorSpec {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            solver: DantzigOptions {
                polygon_sides: self.polygon_sides,
                ..DantzigOptions::default()
            },
            entry_budget: self.entry_budget,
            fold_velocity: self.fold_velocity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.experiment.trials == 0 {
            return bad("experiment.trials must be at least 1");
        }
        if self.grid.angle_count == 0 || self.grid.velocity_count == 0 || self.grid.range_count == 0 {
            return bad("every grid axis needs at least one point");
        }
        if self.schedule.pulse_count() == 0 {
            return bad("schedule needs at least one pulse");
        }
        self.schedule.mode()?;
        let need = match self.estimator.mode {
            EstimatorMode::Joint => 1,
            EstimatorMode::Decoupled => 3,
        };
        if self.estimator.stages.len() != need {
            return Err(HarnessError::Config(format!(
                "estimator.stages needs {need} entries for {:?} mode",
                self.estimator.mode
            )));
        }
        if self.estimator.mode == EstimatorMode::Decoupled
            && (self.schedule.constant_pulses == 0 || self.schedule.stepped_pulses == 0)
        {
            return bad("decoupled mode needs constant_pulses >= 1 and stepped_pulses >= 1");
        }
        Ok(())
    }

    /// Decoupled-estimator settings, angles in radians.
    pub fn decoupled(&self) -> DecoupledConfig {
        let mut d = DecoupledConfig::new(
            self.schedule.constant_pulses,
            self.schedule.stepped_pulses,
            self.grid.angles_rad(),
            self.grid.velocities(),
            self.grid.ranges(),
        );
        if let Some(p) = &self.estimator.step1_pulses {
            d.step1_pulses = p.clone();
        }
        for (slot, spec) in d.stages.iter_mut().zip(&self.estimator.stages) {
            *slot = (*spec).into();
        }
        d.options = self.estimator.solve_options();
        d
    }
}
