//! The experiment configuration format: TOML with strict validation.
//!
//! Unknown keys anywhere in the document are hard errors, and every
//! cross-field requirement (per-kind connection fields, per-model neuron
//! parameters, per-dataset sections) is checked before anything runs. The
//! same structs serialize back out as the defaults-resolved "effective"
//! config echoed into the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub dataset: DatasetConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingConfig>,
    pub run: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input: InputDims,
    pub stages: Vec<StageConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub connection: ConnectionConfig,
    pub neuron: NeuronConfig,
    #[serde(default = "default_charge_scale")]
    pub charge_scale: f64,
    /// Lateral inhibition radius applied to the stage output each step;
    /// absent means no lateral inhibition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inhibition_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionConfig {
    /// "conv" or "dense".
    pub kind: String,
    /// Output feature maps (conv) or output units (dense).
    pub maps: usize,
    /// Square kernel size; conv only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    pub init: InitConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// "constant", "uniform", or "normal".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronConfig {
    /// "if", "lif", "eif", "qif", "adex", "iz", "het-lif", "het-eif",
    /// or "het-qif".
    pub model: String,
    #[serde(default = "default_tau_rc")]
    pub tau_rc: f64,
    #[serde(default = "default_ts")]
    pub ts: f64,
    #[serde(default = "default_capacitance")]
    pub capacitance: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub resting_potential: f64,
    #[serde(default)]
    pub refractory_timesteps: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_potential: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_rh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_quad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_adapt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_adapt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_adapt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    /// "stdp" or "rstdp".
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_lr_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_lr_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub punish_lr_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub punish_lr_minus: Option<f64>,
    #[serde(default = "default_true")]
    pub stabilizer: bool,
    #[serde(default = "default_k_winners")]
    pub k_winners: usize,
    #[serde(default)]
    pub inhibition_radius: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// "synth-bars", "event-files", or "image-csv".
    pub kind: String,
    /// Sample length in time steps.
    pub duration: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_us: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    pub kernel_size: usize,
    /// One output channel per (sigma1, sigma2) pair.
    pub sigma_pairs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// "per-timestep" or "per-sample".
    #[serde(default = "default_cadence")]
    pub cadence: String,
    /// Training phases executed in order; each trains exactly one stage.
    #[serde(default)]
    pub schedule: Vec<PhaseConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub stage: usize,
    pub epochs: usize,
    /// Overrides `run.cadence` for this phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cadence: Option<String>,
}

fn default_charge_scale() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}
fn default_tau_rc() -> f64 {
    10.0
}
fn default_ts() -> f64 {
    1.0
}
fn default_capacitance() -> f64 {
    1.0
}
fn default_threshold() -> f64 {
    20.0
}
fn default_true() -> bool {
    true
}
fn default_k_winners() -> usize {
    1
}
fn default_cadence() -> String {
    "per-timestep".into()
}

fn fail(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Reads, parses, and validates a config file. Relative dataset paths and
/// the output directory resolve against the config file's directory.
pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(format!("cannot read {}: {e}", path.display())))?;
    let mut config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_paths(&mut config, base);
    config.validate()?;
    Ok(config)
}

fn absolutize(path: &mut PathBuf, base: &Path) {
    let joined = if path.is_relative() {
        base.join(&path)
    } else {
        path.clone()
    };
    // Pin to an absolute path so the echoed config means the same thing
    // wherever it is re-run from.
    *path = std::path::absolute(&joined).unwrap_or(joined);
}

fn resolve_paths(config: &mut ExperimentConfig, base: &Path) {
    absolutize(&mut config.run.out_dir, base);
    if let Some(paths) = &mut config.dataset.paths {
        for p in paths {
            absolutize(p, base);
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.network.validate()?;
        self.dataset.validate()?;
        match (self.dataset.kind.as_str(), &self.encoding) {
            ("image-csv", None) => {
                return Err(fail(
                    "encoding: section is required for image-csv datasets",
                ))
            }
            ("image-csv", Some(enc)) => enc.validate()?,
            (_, Some(_)) => {
                return Err(fail(format!(
                    "encoding: section is only used with image-csv datasets, not {:?}",
                    self.dataset.kind
                )))
            }
            _ => {}
        }
        self.run.validate(&self.network)?;
        Ok(())
    }
}

impl NetworkConfig {
    fn validate(&self) -> CliResult<()> {
        let d = &self.input;
        if d.channels == 0 || d.height == 0 || d.width == 0 {
            return Err(fail(format!(
                "network.input: all dims must be at least 1, got {}x{}x{}",
                d.channels, d.height, d.width
            )));
        }
        if self.stages.is_empty() {
            return Err(fail("network.stages: at least one stage is required"));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            stage
                .validate()
                .map_err(|e| fail(format!("network.stages[{i}].{e}")))?;
        }
        Ok(())
    }
}

impl StageConfig {
    /// Field-level checks; deeper numeric validation happens when the
    /// engine objects are built.
    fn validate(&self) -> Result<(), String> {
        self.connection.validate().map_err(|e| format!("connection: {e}"))?;
        self.neuron.validate().map_err(|e| format!("neuron: {e}"))?;
        if let Some(learning) = &self.learning {
            learning.validate().map_err(|e| format!("learning: {e}"))?;
        }
        Ok(())
    }
}

impl ConnectionConfig {
    fn validate(&self) -> Result<(), String> {
        match self.kind.as_str() {
            "conv" => {
                let kernel = self.kernel.ok_or("kernel is required for conv")?;
                if kernel == 0 {
                    return Err("kernel must be at least 1".into());
                }
                if self.stride == 0 {
                    return Err("stride must be at least 1".into());
                }
            }
            "dense" => {
                if self.kernel.is_some() {
                    return Err("kernel only applies to conv connections".into());
                }
                if self.stride != 1 || self.padding != 0 {
                    return Err("stride/padding only apply to conv connections".into());
                }
            }
            other => return Err(format!("unknown kind {other:?}, expected \"conv\" or \"dense\"")),
        }
        if self.maps == 0 {
            return Err("maps must be at least 1".into());
        }
        self.init.validate().map_err(|e| format!("init: {e}"))
    }
}

impl InitConfig {
    fn validate(&self) -> Result<(), String> {
        let forbid = |field: &str, present: bool| -> Result<(), String> {
            if present {
                Err(format!("{field} does not apply to kind {:?}", self.kind))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "constant" => {
                self.value.ok_or("value is required for constant init")?;
                forbid("lo", self.lo.is_some())?;
                forbid("hi", self.hi.is_some())?;
                forbid("mean", self.mean.is_some())?;
                forbid("sd", self.sd.is_some())?;
                forbid("seed", self.seed.is_some())?;
            }
            "uniform" => {
                self.lo.ok_or("lo is required for uniform init")?;
                self.hi.ok_or("hi is required for uniform init")?;
                self.seed.ok_or("seed is required for uniform init")?;
                forbid("value", self.value.is_some())?;
                forbid("mean", self.mean.is_some())?;
                forbid("sd", self.sd.is_some())?;
            }
            "normal" => {
                self.mean.ok_or("mean is required for normal init")?;
                self.sd.ok_or("sd is required for normal init")?;
                self.seed.ok_or("seed is required for normal init")?;
                forbid("value", self.value.is_some())?;
                forbid("lo", self.lo.is_some())?;
                forbid("hi", self.hi.is_some())?;
            }
            other => {
                return Err(format!(
                    "unknown kind {other:?}, expected \"constant\", \"uniform\", or \"normal\""
                ))
            }
        }
        Ok(())
    }
}

pub const NEURON_MODELS: [&str; 9] = [
    "if", "lif", "eif", "qif", "adex", "iz", "het-lif", "het-eif", "het-qif",
];

impl NeuronConfig {
    fn validate(&self) -> Result<(), String> {
        if !NEURON_MODELS.contains(&self.model.as_str()) {
            return Err(format!(
                "unknown model {:?}, expected one of {}",
                self.model,
                NEURON_MODELS.join(", ")
            ));
        }
        let heterogeneous = self.model.starts_with("het-");
        if heterogeneous {
            if self.tau_low.is_none() || self.tau_high.is_none() {
                return Err("tau_low and tau_high are required for heterogeneous models".into());
            }
        } else if self.tau_low.is_some() || self.tau_high.is_some() || self.tau_seed.is_some() {
            return Err("tau_low/tau_high/tau_seed only apply to heterogeneous models".into());
        }
        Ok(())
    }
}

impl LearningSection {
    fn validate(&self) -> Result<(), String> {
        let require = |field: &str, v: Option<f64>| -> Result<(), String> {
            v.map(|_| ())
                .ok_or_else(|| format!("{field} is required for rule {:?}", self.rule))
        };
        let forbid = |field: &str, v: Option<f64>| -> Result<(), String> {
            if v.is_some() {
                Err(format!("{field} does not apply to rule {:?}", self.rule))
            } else {
                Ok(())
            }
        };
        match self.rule.as_str() {
            "stdp" => {
                require("lr_plus", self.lr_plus)?;
                require("lr_minus", self.lr_minus)?;
                forbid("reward_lr_plus", self.reward_lr_plus)?;
                forbid("reward_lr_minus", self.reward_lr_minus)?;
                forbid("punish_lr_plus", self.punish_lr_plus)?;
                forbid("punish_lr_minus", self.punish_lr_minus)?;
            }
            "rstdp" => {
                require("reward_lr_plus", self.reward_lr_plus)?;
                require("reward_lr_minus", self.reward_lr_minus)?;
                require("punish_lr_plus", self.punish_lr_plus)?;
                require("punish_lr_minus", self.punish_lr_minus)?;
                forbid("lr_plus", self.lr_plus)?;
                forbid("lr_minus", self.lr_minus)?;
            }
            other => {
                return Err(format!(
                    "unknown rule {other:?}, expected \"stdp\" or \"rstdp\""
                ))
            }
        }
        if self.k_winners == 0 {
            return Err("k_winners must be at least 1".into());
        }
        Ok(())
    }
}

pub const DATASET_KINDS: [&str; 3] = ["synth-bars", "event-files", "image-csv"];

impl DatasetConfig {
    fn validate(&self) -> CliResult<()> {
        let require = |field: &str, missing: bool| -> CliResult<()> {
            if missing {
                Err(fail(format!(
                    "dataset: {field} is required for kind {:?}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let forbid = |field: &str, present: bool| -> CliResult<()> {
            if present {
                Err(fail(format!(
                    "dataset: {field} does not apply to kind {:?}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        if self.duration == 0 {
            return Err(fail("dataset: duration must be at least 1"));
        }
        match self.kind.as_str() {
            "synth-bars" => {
                require("height", self.height.is_none())?;
                require("width", self.width.is_none())?;
                require("samples_per_class", self.samples_per_class.is_none())?;
                require("seed", self.seed.is_none())?;
                forbid("paths", self.paths.is_some())?;
                forbid("labels", self.labels.is_some())?;
                forbid("window_us", self.window_us.is_some())?;
            }
            "event-files" => {
                require("paths", self.paths.is_none())?;
                require("window_us", self.window_us.is_none())?;
                forbid("height", self.height.is_some())?;
                forbid("width", self.width.is_some())?;
                forbid("samples_per_class", self.samples_per_class.is_some())?;
                forbid("seed", self.seed.is_some())?;
                if self.window_us == Some(0) {
                    return Err(fail("dataset: window_us must be at least 1"));
                }
            }
            "image-csv" => {
                require("paths", self.paths.is_none())?;
                forbid("height", self.height.is_some())?;
                forbid("width", self.width.is_some())?;
                forbid("samples_per_class", self.samples_per_class.is_some())?;
                forbid("seed", self.seed.is_some())?;
                forbid("window_us", self.window_us.is_some())?;
            }
            other => {
                return Err(fail(format!(
                    "dataset: unknown kind {other:?}, expected one of {}",
                    DATASET_KINDS.join(", ")
                )))
            }
        }
        if let (Some(labels), Some(paths)) = (&self.labels, &self.paths) {
            if labels.len() != paths.len() {
                return Err(fail(format!(
                    "dataset: {} labels for {} paths",
                    labels.len(),
                    paths.len()
                )));
            }
        }
        Ok(())
    }
}

impl EncodingConfig {
    fn validate(&self) -> CliResult<()> {
        if self.kernel_size.is_multiple_of(2) || self.kernel_size == 0 {
            return Err(fail(format!(
                "encoding: kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.sigma_pairs.is_empty() {
            return Err(fail("encoding: at least one sigma pair is required"));
        }
        for (i, [s1, s2]) in self.sigma_pairs.iter().enumerate() {
            if !(*s1 > 0.0) || !(*s2 > 0.0) {
                return Err(fail(format!(
                    "encoding: sigma_pairs[{i}] must be positive, got [{s1}, {s2}]"
                )));
            }
        }
        Ok(())
    }
}

pub const CADENCES: [&str; 2] = ["per-timestep", "per-sample"];

impl RunConfig {
    fn validate(&self, network: &NetworkConfig) -> CliResult<()> {
        if !CADENCES.contains(&self.cadence.as_str()) {
            return Err(fail(format!(
                "run: unknown cadence {:?}, expected {}",
                self.cadence,
                CADENCES.join(" or ")
            )));
        }
        for (i, phase) in self.schedule.iter().enumerate() {
            if phase.stage >= network.stages.len() {
                return Err(fail(format!(
                    "run.schedule[{i}]: stage {} out of range ({} stages)",
                    phase.stage,
                    network.stages.len()
                )));
            }
            if network.stages[phase.stage].learning.is_none() {
                return Err(fail(format!(
                    "run.schedule[{i}]: stage {} has no learning section",
                    phase.stage
                )));
            }
            if phase.epochs == 0 {
                return Err(fail(format!("run.schedule[{i}]: epochs must be at least 1")));
            }
            if let Some(cadence) = &phase.cadence {
                if !CADENCES.contains(&cadence.as_str()) {
                    return Err(fail(format!(
                        "run.schedule[{i}]: unknown cadence {cadence:?}, expected {}",
                        CADENCES.join(" or ")
                    )));
                }
            }
        }
        Ok(())
    }
}
