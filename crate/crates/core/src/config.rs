//! Run configuration: one TOML document with a table per component.
//!
//! Every table is optional and falls back to its defaults; unknown keys are
//! rejected at any level. The resolved configuration is written next to
//! every run output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::flow::{BaselineConfig, FlowConfig};
use crate::observables::EstimatorConfig;
use crate::sim::{Checkerboard, LandingConfig, RendererConfig, Roadmap, RoadmapParams, SceneTexture};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    Checkerboard,
    #[default]
    Roadmap,
}

impl std::str::FromStr for TextureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkerboard" => Ok(TextureKind::Checkerboard),
            "roadmap" => Ok(TextureKind::Roadmap),
            other => Err(Error::Config(format!("unknown texture '{other}' (expected checkerboard or roadmap)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub texture: TextureKind,
    pub checkerboard: Checkerboard,
    pub roadmap: RoadmapParams,
}

impl SceneConfig {
    pub fn build(&self) -> SceneTexture {
        match self.texture {
            TextureKind::Checkerboard => SceneTexture::Checkerboard(self.checkerboard),
            TextureKind::Roadmap => SceneTexture::Roadmap(Roadmap::generate(&self.roadmap)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Count density over events that passed the refractory filter.
    pub density_post_refractory: bool,
    pub camera: CameraIntrinsics,
    pub flow: FlowConfig,
    pub baseline: BaselineConfig,
    pub estimator: EstimatorConfig,
    pub renderer: RendererConfig,
    pub landing: LandingConfig,
    pub scene: SceneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            density_post_refractory: true,
            camera: CameraIntrinsics::default(),
            flow: FlowConfig::default(),
            baseline: BaselineConfig::default(),
            estimator: EstimatorConfig::default(),
            renderer: RendererConfig::default(),
            landing: LandingConfig::default(),
            scene: SceneConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets the run seed and propagates it to the renderer.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.renderer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.flow.validate()?;
        self.estimator.validate()?;
        self.renderer.validate()?;
        let l = &self.landing;
        if !(l.z0 > 0.0 && l.hover_s >= 0.0 && l.trim_window_s >= 0.0 && l.timeout_s > 0.0) {
            return Err(Error::Config("landing heights and durations must be positive".into()));
        }
        if !(l.controller.k_p > 0.0) {
            return Err(Error::Config(format!("k_p must be positive, got {}", l.controller.k_p)));
        }
        Ok(())
    }
}
