//! Run configuration: one document (TOML or JSON) with a section per
//! module. Unknown keys are rejected everywhere.

use std::path::Path;

use bfisense::channel::{BasePose, Reflector, Tap};
use bfisense::crb::CrbConfig;
use bfisense::eval::{DatasetConfig, MlpSpec, MusicMcConfig};
use bfisense::select::{RoiGrid, SelectionMode, Target};
use bfisense::{PositionParams, Scenario, SubcarrierGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub roi: RoiConfig,
    pub crb: CrbConfig,
    pub csi: CsiConfig,
    pub quantize: QuantizeConfig,
    pub select: SelectConfig,
    pub ks: KsConfig,
    pub music: MusicConfig,
    pub dataset: DatasetConfig,
    pub mlp: MlpSpec,
    pub evaluate: EvaluateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// LoS plus the default reflector cluster.
    Multipath,
    /// Single LoS path.
    Los,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub n_rx: usize,
    pub n_tx: usize,
    /// `None` = noiseless.
    pub snr_db: Option<f64>,
    pub n_subcarriers: usize,
    /// Replaces the preset's reflectors when given.
    pub reflectors: Option<Vec<Reflector>>,
    /// Multipath taps that move with the LoS path (none by default).
    pub taps: Option<Vec<Tap>>,
    pub base: BasePose,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Multipath,
            n_rx: 2,
            n_tx: 4,
            snr_db: Some(20.0),
            n_subcarriers: 1,
            reflectors: None,
            taps: None,
            base: BasePose::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario, CliError> {
        let mut s = match self.preset {
            Preset::Multipath => Scenario::default_multipath(self.n_rx, self.n_tx)?,
            Preset::Los => Scenario::los_only(self.n_rx, self.n_tx)?,
        };
        let d = SubcarrierGrid::default();
        s.grid = SubcarrierGrid::new(d.center_frequency, d.spacing, self.n_subcarriers)?;
        if let Some(r) = &self.reflectors {
            s.reflectors = r.clone();
        }
        if let Some(t) = &self.taps {
            s.taps = t.clone();
        }
        s.snr_db = self.snr_db;
        s.base = self.base;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoiConfig {
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub target: Target,
    /// Explicit points; overrides the random annulus.
    pub points: Option<Vec<[f64; 2]>>,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            r_min: 5.0,
            r_max: 10.0,
            target: Target::Location,
            points: None,
        }
    }
}

impl RoiConfig {
    pub fn build(&self, seed: u64) -> Result<RoiGrid, CliError> {
        Ok(match &self.points {
            Some(p) => RoiGrid::from_points(p.clone(), self.target)?,
            None => RoiGrid::annulus(self.count, self.r_min, self.r_max, self.target, seed)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsiConfig {
    pub position: PositionParams,
    pub k: usize,
    pub noisy: bool,
}

impl Default for CsiConfig {
    fn default() -> Self {
        Self {
            position: PositionParams::polar(0.0, 0.0, 5.0),
            k: 1,
            noisy: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeConfig {
    pub b_psi: u8,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self { b_psi: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectConfig {
    pub n_sel: usize,
    pub mode: SelectionMode,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            n_sel: 5,
            mode: SelectionMode::Information,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsConfig {
    pub samples: usize,
    pub position: PositionParams,
    pub k: usize,
}

impl Default for KsConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            position: PositionParams::polar(0.0, 0.0, 5.0),
            k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MusicConfig {
    pub snrs_db: Vec<f64>,
    pub aod: f64,
    pub trials: usize,
    pub grid_step_deg: f64,
    pub refine: bool,
    pub k: usize,
}

impl Default for MusicConfig {
    fn default() -> Self {
        let mc = MusicMcConfig::default();
        Self {
            snrs_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            aod: 0.0,
            trials: mc.trials,
            grid_step_deg: mc.grid_step_deg,
            refine: mc.refine,
            k: mc.subcarrier,
        }
    }
}

impl MusicConfig {
    pub fn mc(&self, seed: u64) -> MusicMcConfig {
        MusicMcConfig {
            trials: self.trials,
            grid_step_deg: self.grid_step_deg,
            refine: self.refine,
            subcarrier: self.k,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureChoice {
    All,
    /// Greedy CRB selection (`select.n_sel`).
    Proposed,
    /// Uniformly random `select.n_sel` elements per subcarrier.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub features: FeatureChoice,
    pub train_fraction: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            features: FeatureChoice::Proposed,
            train_fraction: 0.8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
        }
    }

    /// SHA-256 over the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
