//! JSON experiment descriptions.
//!
//! A file is a Monte Carlo config when its top-level object has a `base`
//! key, otherwise a single scenario. Unknown fields are rejected and every
//! invalid value is reported with a JSON pointer to the offending field.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;
use thiserror::Error;

use crate::bearing::SensorParams;
use crate::ellipsoid::Ellipsoid;
use crate::fusion::{AlphaCriterion, FusionMethod};
use crate::linalg::Vec2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Parse(String),

    #[error("invalid value at {pointer}: {message}")]
    Validation { pointer: String, message: String },
}

impl ConfigError {
    pub fn validation(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

/// Estimation strategy for one simulation run: a peer-fusion rule, or no
/// peer fusion at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMethod {
    Kalman,
    Ci,
    Ici,
    Cce,
    #[serde(rename = "noncollab")]
    NonCollaborative,
}

impl RunMethod {
    pub const ALL: [RunMethod; 5] = [
        RunMethod::NonCollaborative,
        RunMethod::Kalman,
        RunMethod::Ci,
        RunMethod::Ici,
        RunMethod::Cce,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RunMethod::Kalman => "kalman",
            RunMethod::Ci => "ci",
            RunMethod::Ici => "ici",
            RunMethod::Cce => "cce",
            RunMethod::NonCollaborative => "noncollab",
        }
    }

    /// The peer-fusion rule, `None` for the non-collaborative baseline.
    pub fn fusion(&self) -> Option<FusionMethod> {
        match self {
            RunMethod::Kalman => Some(FusionMethod::Kalman),
            RunMethod::Ci => Some(FusionMethod::Ci),
            RunMethod::Ici => Some(FusionMethod::Ici),
            RunMethod::Cce => Some(FusionMethod::Cce),
            RunMethod::NonCollaborative => None,
        }
    }
}

impl fmt::Display for RunMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RunMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        RunMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown method {s:?} (expected kalman, ci, ici, cce or noncollab)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Complete,
    /// `adjacency[s]` lists the agents that receive the broadcasts of `s`.
    Adjacency(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Steps between broadcast rounds.
    pub comm_period: u64,
    /// Independent probability that a single message is lost.
    pub drop_prob: f64,
    pub topology: Topology,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            comm_period: 1,
            drop_prob: 0.0,
            topology: Topology::Complete,
        }
    }
}

impl NetworkConfig {
    /// Whether broadcasts of `sender` reach `receiver`. Self-delivery never happens.
    pub fn delivers(&self, sender: usize, receiver: usize) -> bool {
        if sender == receiver {
            return false;
        }
        match &self.topology {
            Topology::Complete => true,
            Topology::Adjacency(adj) => adj.get(sender).is_some_and(|out| out.contains(&receiver)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub initial_estimate: Ellipsoid,
    pub sensor: SensorParams,
}

fn default_methods() -> Vec<RunMethod> {
    RunMethod::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub target: Vec2,
    pub agents: Vec<AgentConfig>,
    pub steps: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<RunMethod>,
    #[serde(default)]
    pub alpha_criterion: AlphaCriterion,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    /// Structural checks needed to build a world. A zero step count is
    /// allowed here; file loading rejects it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agents.is_empty() {
            return Err(ConfigError::validation(
                "/agents",
                "at least one agent is required",
            ));
        }
        if self.network.comm_period == 0 {
            return Err(ConfigError::validation(
                "/network/comm_period",
                "must be at least 1",
            ));
        }
        let p = self.network.drop_prob;
        if !(0.0..1.0).contains(&p) {
            return Err(ConfigError::validation(
                "/network/drop_prob",
                format!("must lie in [0, 1), got {p}"),
            ));
        }
        if let Topology::Adjacency(adj) = &self.network.topology {
            if adj.len() != self.agents.len() {
                return Err(ConfigError::validation(
                    "/network/topology/adjacency",
                    format!("expected {} rows, got {}", self.agents.len(), adj.len()),
                ));
            }
            for (s, row) in adj.iter().enumerate() {
                if let Some(bad) = row.iter().position(|&r| r >= self.agents.len()) {
                    return Err(ConfigError::validation(
                        format!("/network/topology/adjacency/{s}/{bad}"),
                        format!("agent index {} out of range", row[bad]),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_file(&self, prefix: &str) -> Result<(), ConfigError> {
        self.validate().map_err(|e| match e {
            ConfigError::Validation { pointer, message } => ConfigError::Validation {
                pointer: format!("{prefix}{pointer}"),
                message,
            },
            other => other,
        })?;
        if self.steps == 0 {
            return Err(ConfigError::validation(
                format!("{prefix}/steps"),
                "must be at least 1",
            ));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::validation(
                format!("{prefix}/methods"),
                "at least one method is required",
            ));
        }
        Ok(())
    }
}

/// Location/scale of a Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    pub mean: f64,
    pub std: f64,
}

impl NormalParams {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

/// Distributions for the randomized Monte Carlo quantities. Draws violating
/// positivity (or `r_min < r_max`, `sigma < 90°`) are redrawn up to
/// `max_attempts` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Randomization {
    /// Initial-estimate standard deviation γ (m): `x̂ = p + N(0, γ²I)`, `P̂ = γ²I`.
    pub gamma: NormalParams,
    pub r_min: NormalParams,
    pub r_max: NormalParams,
    pub sigma_deg: NormalParams,
    pub max_attempts: u32,
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            gamma: NormalParams::new(10.0, 10.0),
            r_min: NormalParams::new(2.0, 5.0),
            r_max: NormalParams::new(80.0, 20.0),
            sigma_deg: NormalParams::new(5.0, 5.0),
            max_attempts: 1000,
        }
    }
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Template scenario; initial estimates and sensor ranges/noise are redrawn per run.
    pub base: ScenarioConfig,
    pub runs: u64,
    #[serde(default)]
    pub randomization: Randomization,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base.validate_file("/base")?;
        if self.runs == 0 {
            return Err(ConfigError::validation("/runs", "must be at least 1"));
        }
        if self.histogram_bins == 0 {
            return Err(ConfigError::validation(
                "/histogram_bins",
                "must be at least 1",
            ));
        }
        let r = &self.randomization;
        for (name, d) in [
            ("gamma", r.gamma),
            ("r_min", r.r_min),
            ("r_max", r.r_max),
            ("sigma_deg", r.sigma_deg),
        ] {
            if !(d.mean.is_finite() && d.std.is_finite() && d.std >= 0.0) {
                return Err(ConfigError::validation(
                    format!("/randomization/{name}"),
                    "mean must be finite and std finite and nonnegative",
                ));
            }
        }
        if r.max_attempts == 0 {
            return Err(ConfigError::validation(
                "/randomization/max_attempts",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedConfig {
    Scenario(ScenarioConfig),
    MonteCarlo(MonteCarloConfig),
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let pointer = pointer_of(err.path());
        ConfigError::Validation {
            pointer,
            message: err.into_inner().to_string(),
        }
    })
}

/// Parses any JSON document, reporting type errors with a JSON pointer.
pub fn parse_document<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    from_value(value)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if value.get("base").is_some() {
        let mc: MonteCarloConfig = from_value(value)?;
        mc.validate()?;
        Ok(LoadedConfig::MonteCarlo(mc))
    } else {
        let sc: ScenarioConfig = from_value(value)?;
        sc.validate_file("")?;
        Ok(LoadedConfig::Scenario(sc))
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
