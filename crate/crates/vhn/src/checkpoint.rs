//! Model checkpoints. The header echoes the full configuration as JSON (so a
//! checkpoint alone is enough to prepare meshes for inference), then the
//! parameter count and a SHA-256 of the parameters, then the parameters in
//! declaration order as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vhn_core::model::count_parameters;
use vhn_core::VhnParams;

use crate::binfmt::{Reader, Writer};
use crate::cache::PrepSettings;
use crate::config::{EigenSection, FeatureSection, ModelSection, RunConfig};
use crate::error::{Result, VhnError};

const MAGIC: &[u8; 8] = b"VHNCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelSection,
    pub in_channels: usize,
    pub features: FeatureSection,
    pub eigen: EigenSection,
    pub rosy_order: u32,
    pub epoch: usize,
    pub loss: f64,
}

impl CheckpointMeta {
    pub fn new(run: &RunConfig, params: &VhnParams, epoch: usize, loss: f64) -> Self {
        CheckpointMeta {
            model: ModelSection::from_config(&params.config),
            in_channels: params.config.in_channels,
            features: run.features.clone(),
            eigen: run.eigen.clone(),
            rosy_order: run.train.rosy_order,
            epoch,
            loss,
        }
    }

    pub fn prep_settings(&self) -> Result<PrepSettings> {
        Ok(PrepSettings { features: self.features.to_spec()?, k: self.model.k, eigen: self.eigen.to_config() })
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: VhnParams,
}

fn params_digest(values: &[f64]) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_string(&self.meta).map_err(|e| VhnError::Config(e.to_string()))?;
        let mut w = Writer::new(MAGIC, VERSION);
        w.str(&meta);
        w.u64(self.params.values.len() as u64);
        w.bytes(&params_digest(&self.params.values));
        w.f64s(&self.params.values);
        Ok(w.finish())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::binfmt::write_atomic(path, &self.to_bytes()?)
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::open(data, path, MAGIC, VERSION)?;
        let meta: CheckpointMeta = serde_json::from_str(&r.str()?).map_err(|e| VhnError::format(path, format!("bad header: {e}")))?;
        let count = r.usize()?;
        let digest = r.bytes()?.to_vec();
        let config = meta.model.to_config(meta.in_channels)?;
        let expected = count_parameters(&config);
        if count != expected {
            return Err(VhnError::format(path, format!("{count} parameters, configuration needs {expected}")));
        }
        let values = r.f64s(count)?;
        r.finish()?;
        if digest != params_digest(&values) {
            return Err(VhnError::format(path, "parameter hash mismatch"));
        }
        let params = VhnParams::from_values(&config, values)?;
        Ok(Checkpoint { meta, params })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| VhnError::io(path, e))?;
        Self::from_bytes(&data, path)
    }
}
