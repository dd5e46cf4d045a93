//! Experiment configuration: JSON in, validated struct out.

use std::path::{Path, PathBuf};

use mhdlab_core::dispersion::{log_spaced, CutoffSpec, DECAY_WINDOW, MIN_DECAY_POINTS};
use mhdlab_core::lattice::MAX_RADIUS;
use mhdlab_core::resonance::{parse_sigma, Sigma, CENSUS_MAX_RADIUS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Energy,
    Converge,
    Resonance,
    Dispersion,
    Probe,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Energy => "energy",
            Scenario::Converge => "converge",
            Scenario::Resonance => "resonance",
            Scenario::Dispersion => "dispersion",
            Scenario::Probe => "probe",
        }
    }

    pub const ALL: [Scenario; 5] = [
        Scenario::Energy,
        Scenario::Converge,
        Scenario::Resonance,
        Scenario::Dispersion,
        Scenario::Probe,
    ];
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?} (expected energy, converge, resonance, dispersion or probe)"))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("config field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// Everything a scenario needs. Unknown keys are rejected; missing keys take
/// the headline-sweep defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Lattice radius.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_s_prime")]
    pub s_prime: f64,
    /// Strictly decreasing.
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    /// Overrides the rule `dt = min(1e-3, 0.05ε)`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_decay")]
    pub spectrum_decay: f64,
    /// `‖U₀‖_{H^s}`, split evenly between `u₀` and `b₀`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Low/high cutoffs for the remainder split.
    #[serde(rename = "N_list", default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Diagnostic times per run, evenly spaced on `[0, T]`.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Keep every k-th step of the energy runs.
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub cutoff: CutoffSpec,
    /// Kernel times for the decay fit.
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    #[serde(rename = "strichartz_T", default = "default_strichartz_horizon")]
    pub strichartz_horizon: f64,
    #[serde(default = "default_strichartz_eps")]
    pub strichartz_eps: Vec<f64>,
    /// Random fields drawn by the product-law probe.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Restricts the census to these sign patterns, e.g. `"+--"`; empty means all 8.
    #[serde(default)]
    pub sigma_filter: Vec<String>,
    /// Output directory; the command line and `MHDLAB_OUT` take precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_n() -> usize {
    4
}
fn default_s() -> f64 {
    4.0
}
fn default_s_prime() -> f64 {
    2.0
}
fn default_eps_list() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn default_horizon() -> f64 {
    0.3
}
fn default_seed() -> u64 {
    7
}
fn default_decay() -> f64 {
    3.0
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_n_list() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_checkpoints() -> usize {
    30
}
fn default_stride() -> usize {
    10
}
fn default_t_list() -> Vec<f64> {
    log_spaced(DECAY_WINDOW.0, DECAY_WINDOW.1, 8)
}
fn default_strichartz_horizon() -> f64 {
    1.0
}
fn default_strichartz_eps() -> Vec<f64> {
    log_spaced(1e-3, 1e-1, 5)
}
fn default_samples() -> usize {
    200
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Defaults for `scenario`, as if parsed from `{"scenario": ...}`.
    pub fn defaults(scenario: Scenario) -> Self {
        let text = serde_json::json!({ "scenario": scenario }).to_string();
        serde_json::from_str(&text).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 || self.n > MAX_RADIUS {
            return Err(invalid("n", format!("must lie in 1..={MAX_RADIUS}, got {}", self.n)));
        }
        if !self.s.is_finite() || !self.s_prime.is_finite() {
            return Err(invalid("s", "Sobolev indices must be finite"));
        }
        if self.s_prime >= self.s {
            return Err(invalid(
                "s_prime",
                format!("must be < s = {}, got {}", self.s, self.s_prime),
            ));
        }
        if self.eps_list.is_empty() {
            return Err(invalid("eps_list", "must not be empty"));
        }
        for &e in &self.eps_list {
            positive("eps_list", e)?;
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps_list", "must be strictly decreasing"));
        }
        positive("T", self.horizon)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid("amplitude", "must be nonnegative and finite"));
        }
        if !(self.spectrum_decay >= 0.0 && self.spectrum_decay.is_finite()) {
            return Err(invalid("spectrum_decay", "must be nonnegative and finite"));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be at least 1"));
        }
        if self.checkpoints == 0 {
            return Err(invalid("checkpoints", "must be at least 1"));
        }
        self.sigmas()?;
        match self.scenario {
            Scenario::Converge => {
                if self.s <= 3.5 {
                    return Err(invalid("s", format!("converge needs s > 3.5, got {}", self.s)));
                }
                if self.n_list.is_empty() {
                    return Err(invalid("N_list", "must not be empty"));
                }
                if let Some(&bad) = self.n_list.iter().find(|&&c| c == 0 || c > self.n) {
                    return Err(invalid(
                        "N_list",
                        format!("cutoff {bad} needs a lattice of radius >= {bad}; n = {}", self.n),
                    ));
                }
            }
            Scenario::Resonance => {
                if self.n > CENSUS_MAX_RADIUS {
                    return Err(invalid(
                        "n",
                        format!("census is limited to n <= {CENSUS_MAX_RADIUS}"),
                    ));
                }
            }
            Scenario::Dispersion => {
                self.cutoff
                    .validate()
                    .map_err(|e| invalid("cutoff", e.to_string()))?;
                let (lo, hi) = DECAY_WINDOW;
                if self.t_list.len() < MIN_DECAY_POINTS {
                    return Err(invalid(
                        "t_list",
                        format!("needs at least {MIN_DECAY_POINTS} times"),
                    ));
                }
                if self.t_list.iter().any(|t| !(lo..=hi).contains(t)) {
                    return Err(invalid("t_list", format!("times must lie in [{lo}, {hi}]")));
                }
                positive("strichartz_T", self.strichartz_horizon)?;
                mhdlab_core::dispersion::strichartz_nodes(
                    &self.strichartz_eps,
                    self.strichartz_horizon,
                )
                .map_err(|e| invalid("strichartz_eps", e.to_string()))?;
            }
            Scenario::Probe => {
                if self.samples < 100 {
                    return Err(invalid(
                        "samples",
                        format!("probe needs at least 100, got {}", self.samples),
                    ));
                }
            }
            Scenario::Energy => {}
        }
        Ok(())
    }

    /// Time step for a run at `eps`.
    pub fn dt_for(&self, eps: f64) -> f64 {
        self.dt.unwrap_or_else(|| (1e-3f64).min(0.05 * eps))
    }

    pub fn sigmas(&self) -> Result<Option<Vec<Sigma>>, ConfigError> {
        if self.sigma_filter.is_empty() {
            return Ok(None);
        }
        self.sigma_filter
            .iter()
            .map(|t| {
                parse_sigma(t)
                    .ok_or_else(|| invalid("sigma_filter", format!("bad sign pattern {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}
