use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wirewatch_core::geometry::{CameraIntrinsics, Extrinsics};
use wirewatch_core::{Connectivity, PipelineConfig};

use crate::args::PipelineFlags;
use crate::error::{CliError, CliResult};

/// Reads a JSON document. Unreadable files are I/O errors, bad content is a
/// validation error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::at(path, e.into()))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::validation(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::at(path, e.into()))
}

/// Pinhole intrinsics plus the camera-to-ground transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub intrinsics: CameraIntrinsics<f64>,
    #[serde(default)]
    pub extrinsics: Extrinsics<f64>,
}

impl CameraFile {
    pub fn validate(&self) -> CliResult<()> {
        self.intrinsics.validate()?;
        self.extrinsics.validate()?;
        Ok(())
    }
}

impl PipelineFlags {
    pub fn is_empty(&self) -> bool {
        self.window.is_none()
            && self.dist_threshold.is_none()
            && self.min_area.is_none()
            && self.kernel.is_none()
            && self.connectivity.is_none()
            && self.keep_mode.is_none()
            && self.morphology.is_none()
    }

    /// Flags win over config values.
    pub fn apply(&self, mut cfg: PipelineConfig) -> CliResult<PipelineConfig> {
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.dist_threshold {
            cfg.dist_threshold = v;
        }
        if let Some(v) = self.min_area {
            cfg.min_area = v;
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = &self.connectivity {
            cfg.connectivity = if v == "4" { Connectivity::Four } else { Connectivity::Eight };
        }
        if let Some(v) = self.keep_mode {
            cfg.keep_mode = v;
        }
        if let Some(v) = self.morphology {
            cfg.morphology = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn resolve_pipeline(config: Option<&Path>, flags: &PipelineFlags) -> CliResult<PipelineConfig> {
    let base = match config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    flags.apply(base)
}
