//! Scenario configuration files (TOML).
//!
//! A config holds the material, the initial profile, the grid, the
//! controller, the stepper, the actuation side and the requested outputs.
//! `presets/zinc.toml` is the documented reference and the base of every
//! preset. Unknown keys are rejected so that typos surface as config errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stefan_core::oracle::OracleConfig;
use stefan_core::{
    ActuationSide, ControllerSpec, GridSpec, InitialProfile, PhysicalParams, Scenario, Scheme,
    StepperConfig,
};

use crate::error::CliError;

/// Text of the shipped zinc preset.
pub const ZINC_PRESET: &str = include_str!("../presets/zinc.toml");

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "STEFAN_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "PhysicalParams::zinc")]
    pub params: PhysicalParams,
    pub initial: InitialProfile,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    pub controller: ControllerSpec,
    pub stepper: StepperSection,
    #[serde(default)]
    pub side: ActuationSide,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_grid() -> GridSpec {
    GridSpec::uniform(101)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_output_stride")]
    pub output_stride: usize,
    /// Samples per profile snapshot; 0 disables snapshots (and diagnostics).
    #[serde(default = "default_profile_stride")]
    pub profile_stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    /// Defaults to `1e-3 L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_floor: Option<f64>,
    /// Defaults to `L - 1e-3 L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_ceiling: Option<f64>,
}

fn default_output_stride() -> usize {
    10
}

fn default_profile_stride() -> usize {
    10
}

impl StepperSection {
    pub fn to_config(&self, length: f64) -> StepperConfig {
        let mut cfg = StepperConfig::new(length, self.dt, self.t_end, self.output_stride);
        cfg.scheme = self.scheme;
        cfg.profile_stride = self.profile_stride;
        if let Some(f) = self.s_floor {
            cfg.s_floor = f;
        }
        if let Some(c) = self.s_ceiling {
            cfg.s_ceiling = c;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub cells: usize,
    /// Seconds between oracle samples.
    pub output_interval: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            cells: 200,
            output_interval: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Output root; `--out` wins, then this, then `$STEFAN_OUT_DIR`, then `runs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub samples: bool,
    #[serde(default = "yes")]
    pub profiles: bool,
    #[serde(default = "yes")]
    pub diagnostics: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: None,
            samples: true,
            profiles: true,
            diagnostics: true,
        }
    }
}

/// Robust-law sweep: the cartesian product of the listed perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps_l: Vec<f64>,
    pub eps_f: Vec<f64>,
    pub eps_s: Vec<f64>,
    /// Bound on `|ε_f - ε_l| / (1 + ε_l)` for a triple to count as covered
    /// by the robust-law guarantee.
    #[serde(default = "default_ratio_bound")]
    pub ratio_bound: f64,
}

fn default_ratio_bound() -> f64 {
    0.1
}

/// Command-line overrides shared by every verb.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn zinc() -> Self {
        Self::parse(ZINC_PRESET).expect("shipped preset parses")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.grid {
            self.grid = GridSpec::uniform(n);
        }
        if let Some(dt) = o.dt {
            // keep the sampling period in seconds roughly fixed
            let period = self.stepper.dt * self.stepper.output_stride as f64;
            self.stepper.dt = dt;
            self.stepper.output_stride = ((period / dt).round() as usize).max(1);
        }
        if let Some(h) = o.horizon {
            self.stepper.t_end = h;
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            params: self.params,
            initial: self.initial.clone(),
            grid: self.grid,
            controller: self.controller,
            stepper: self.stepper.to_config(self.params.length),
            side: self.side,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let InitialProfile::Tabulated { liquid, solid, .. } = &self.initial {
            if liquid.len() < 2 || solid.len() < 2 {
                return Err(CliError::Config(
                    "tabulated profiles need at least 2 values per phase".into(),
                ));
            }
        }
        let s0 = self.initial.s0();
        if !(s0 > 0.0 && s0 < self.params.length) {
            return Err(CliError::Config(format!(
                "initial interface s0 = {s0} must lie inside (0, L)"
            )));
        }
        if self.oracle.cells < 4 || self.oracle.output_interval.is_nan() || self.oracle.output_interval <= 0.0 {
            return Err(CliError::Config(
                "oracle needs cells >= 4 and a positive output_interval".into(),
            ));
        }
        if let Some(sw) = &self.sweep {
            if sw.eps_l.is_empty() || sw.eps_f.is_empty() || sw.eps_s.is_empty() {
                return Err(CliError::Config("sweep lists must be non-empty".into()));
            }
        }
        Ok(())
    }

    pub fn oracle_config(&self) -> OracleConfig {
        let mut oc = OracleConfig::new(
            self.oracle.cells,
            self.stepper.t_end,
            self.oracle.output_interval,
        );
        oc.reconstruct_nodes = self.grid.n_l.max(self.grid.n_s);
        oc
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// `--out`, then the config, then the environment, then `./runs`.
pub fn output_root(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(dir) = cfg.and_then(|c| c.outputs.dir.clone()) {
        return dir;
    }
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
