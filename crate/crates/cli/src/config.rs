//! Run configuration files.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};

use qwalk_core::lattice::{make_input_state, truncated_gaussian_profile};
use qwalk_core::{HardwareParams, LatticeGeometry, NoiseModel, SpinorField, WalkStepParams, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorChoice {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Packet centre, in sites.
    pub center: i64,
    pub sigma: f64,
    /// Inclusive support of the truncated profile; `null` keeps the whole lattice.
    pub window: Option<[i64; 2]>,
    /// Coin amplitudes as `[[re, im], [re, im]]` for `|R>` and `|L>`.
    pub coin: [[f64; 2]; 2],
    /// Boost `k0` applied as `exp(i k0 x)`.
    #[serde(default)]
    pub momentum: f64,
    /// Keep only one energy sector of the prepared state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<SectorChoice>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            center: 0,
            sigma: 3.0,
            window: Some([-5, 5]),
            coin: [[FRAC_1_SQRT_2, 0.0], [FRAC_1_SQRT_2, 0.0]],
            momentum: 0.0,
            project: None,
        }
    }
}

impl InputConfig {
    pub fn coin_amplitudes(&self) -> [C64; 2] {
        [
            C64::new(self.coin[0][0], self.coin[0][1]),
            C64::new(self.coin[1][0], self.coin[1][1]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub counts: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_lattice_size")]
    pub lattice_size: usize,
    #[serde(default = "default_walk")]
    pub walk: WalkStepParams,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Path to a noise-model JSON, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    /// Output directory, relative to the working directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_lattice_size() -> usize {
    128
}

fn default_walk() -> WalkStepParams {
    WalkStepParams::Hardware(HardwareParams::dirac_setup())
}

fn default_steps() -> usize {
    8
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice_size: default_lattice_size(),
            walk: default_walk(),
            input: InputConfig::default(),
            steps: default_steps(),
            noise_model: None,
            sampling: None,
            output_dir: default_output_dir(),
        }
    }
}

/// A validated configuration with its relative paths resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub noise: Option<NoiseModel>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base)
    }

    /// Validate and resolve paths against `base`.
    pub fn resolve(self, base: &Path) -> Result<LoadedConfig, CliError> {
        self.validate()?;
        let noise = match &self.noise_model {
            Some(rel) => {
                let path = base.join(rel);
                let text = fs::read_to_string(&path).map_err(|e| {
                    CliError::Config(format!("cannot read noise model {}: {e}", path.display()))
                })?;
                let noise: NoiseModel = serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("invalid noise model {}: {e}", path.display()))
                })?;
                noise.validate().map_err(CliError::config)?;
                if noise.steps() < self.steps {
                    return Err(CliError::Config(format!(
                        "noise model covers {} steps, config asks for {}",
                        noise.steps(),
                        self.steps
                    )));
                }
                if !matches!(self.walk, WalkStepParams::Hardware(_)) {
                    return Err(CliError::Config(
                        "a noise model needs the hardware walk".into(),
                    ));
                }
                Some(noise)
            }
            None => None,
        };
        let output_dir = self.output_dir.clone();
        Ok(LoadedConfig {
            config: self,
            noise,
            output_dir,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry()?;
        self.walk.validate().map_err(CliError::config)?;
        if let Some(s) = &self.sampling {
            if s.counts == 0 {
                return Err(CliError::Config("sampling counts must be positive".into()));
            }
        }
        if !self.input.momentum.is_finite() {
            return Err(CliError::Config("input momentum must be finite".into()));
        }
        self.input_state()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<LatticeGeometry, CliError> {
        LatticeGeometry::new(self.lattice_size).map_err(CliError::config)
    }

    /// Prepared input state before any sector projection.
    pub fn input_state(&self) -> Result<SpinorField, CliError> {
        let geometry = self.geometry()?;
        let (lo, hi) = match self.input.window {
            Some([lo, hi]) => (lo, hi),
            None => (geometry.min_site(), geometry.max_site()),
        };
        let profile = truncated_gaussian_profile(self.input.center, self.input.sigma, lo, hi, geometry)
            .map_err(CliError::config)?;
        let state = make_input_state(self.input.coin_amplitudes(), &profile, geometry)
            .map_err(CliError::config)?;
        if self.input.momentum == 0.0 {
            Ok(state)
        } else {
            state.boosted(self.input.momentum).map_err(CliError::config)
        }
    }
}
