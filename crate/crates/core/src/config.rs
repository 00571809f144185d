//! Run configuration files. Every section is optional; omitted sections
//! take the paper-calibrated wafer values.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::electrical::ElectricalParams;
use crate::error::{Error, Result};
use crate::geometry::StackGeometry;
use crate::ler::LerModel;
use crate::wafer::{SourceModel, WaferConfig, WaferLayout, WaferNoise};
use crate::writer::{LwNoiseModel, WriterConfig};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    seed: Option<u64>,
    layout: Option<WaferLayout>,
    writer: Option<WriterConfig>,
    lw_model: Option<LwNoiseModel>,
    stack: Option<StackGeometry>,
    source: Option<SourceModel>,
    ler: Option<LerModel>,
    electrical: Option<ElectricalParams>,
    angles: Option<(f64, f64)>,
    noise: Option<WaferNoise>,
}

/// Effective configuration of a run, echoed into output metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub wafer: WaferConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            wafer: WaferConfig::paper(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: RunConfigFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let base = WaferConfig::paper();
        let cfg = Self {
            seed: file.seed.unwrap_or(0),
            wafer: WaferConfig {
                layout: file.layout.unwrap_or(base.layout),
                writer: file.writer.unwrap_or(base.writer),
                lw_model: file.lw_model.unwrap_or(base.lw_model),
                stack: file.stack.unwrap_or(base.stack),
                source: file.source.unwrap_or(base.source),
                ler: file.ler.unwrap_or(base.ler),
                electrical: file.electrical.unwrap_or(base.electrical),
                angles: file.angles.unwrap_or(base.angles),
                noise: file.noise.unwrap_or(base.noise),
            },
        };
        cfg.wafer.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Flat JSON with the same sections a config file accepts.
    pub fn to_json(&self) -> Result<String> {
        let w = &self.wafer;
        let value = serde_json::json!({
            "seed": self.seed,
            "layout": w.layout,
            "writer": w.writer,
            "lw_model": w.lw_model,
            "stack": w.stack,
            "source": w.source,
            "ler": w.ler,
            "electrical": w.electrical,
            "angles": w.angles,
            "noise": w.noise,
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }

    /// SHA-256 of the effective wafer configuration (seed excluded).
    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(&self.wafer)?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
