//! JSON run configuration. Unknown keys are rejected and every relative path
//! is resolved against the directory holding the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vhn_core::features::{FeatureKind, FeatureSpec};
use vhn_core::spectral::EigenConfig;
use vhn_core::{TrainConfig, VhnConfig};

use crate::cache::PrepSettings;
use crate::error::{Result, VhnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshEntry {
    pub mesh: PathBuf,
    /// Ground-truth field file, needed for training and evaluation.
    #[serde(default)]
    pub field: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub kinds: Vec<String>,
    pub hks_channels: usize,
    pub scalar_k: usize,
    pub normalize: bool,
    pub rotate_concat: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection::from_spec(&FeatureSpec::default())
    }
}

impl FeatureSection {
    pub fn from_spec(s: &FeatureSpec) -> Self {
        FeatureSection {
            kinds: s.kinds.iter().map(|k| k.name().to_string()).collect(),
            hks_channels: s.hks_channels,
            scalar_k: s.scalar_k,
            normalize: s.normalize,
            rotate_concat: s.rotate_concat,
        }
    }

    pub fn to_spec(&self) -> Result<FeatureSpec> {
        let kinds = self
            .kinds
            .iter()
            .map(|k| FeatureKind::parse(k).ok_or_else(|| VhnError::Config(format!("unknown feature kind {k:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            return Err(VhnError::Config("at least one feature kind is required".into()));
        }
        Ok(FeatureSpec { kinds, hks_channels: self.hks_channels, scalar_k: self.scalar_k, normalize: self.normalize, rotate_concat: self.rotate_concat })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub num_blocks: usize,
    pub hidden_channels: usize,
    pub times_per_block: usize,
    pub k: usize,
    pub out_channels: usize,
    pub dropout: f64,
    /// Fixed diffusion time unit; filled in from the first training mesh
    /// when absent.
    pub time_scale: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection::from_config(&VhnConfig::default())
    }
}

impl ModelSection {
    pub fn from_config(c: &VhnConfig) -> Self {
        ModelSection {
            num_blocks: c.num_blocks,
            hidden_channels: c.hidden_channels,
            times_per_block: c.times_per_block,
            k: c.k,
            out_channels: c.out_channels,
            dropout: c.dropout,
            time_scale: c.time_scale,
        }
    }

    pub fn to_config(&self, in_channels: usize) -> Result<VhnConfig> {
        let c = VhnConfig {
            num_blocks: self.num_blocks,
            hidden_channels: self.hidden_channels,
            times_per_block: self.times_per_block,
            k: self.k,
            in_channels,
            out_channels: self.out_channels,
            dropout: self.dropout,
            time_scale: self.time_scale,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub rosy_order: u32,
    pub accumulate: usize,
    /// Write `epoch-NNNNN.ckpt` every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            decay_factor: t.decay_factor,
            decay_every: t.decay_every,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            rosy_order: t.rosy_order,
            accumulate: t.accumulate,
            checkpoint_every: 500,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, dropout: f64, seed: u64) -> Result<TrainConfig> {
        let c = TrainConfig {
            learning_rate: self.learning_rate,
            decay_factor: self.decay_factor,
            decay_every: self.decay_every,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            dropout,
            seed,
            rosy_order: self.rosy_order,
            accumulate: self.accumulate,
            ..TrainConfig::default()
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSection {
    pub dense_max: usize,
    pub block_size: usize,
    pub tolerance: f64,
    pub cluster_tolerance: f64,
    pub complete_clusters: bool,
    pub seed: u64,
}

impl Default for EigenSection {
    fn default() -> Self {
        let e = EigenConfig::default();
        EigenSection {
            dense_max: e.dense_max,
            block_size: e.block_size,
            tolerance: e.tolerance,
            cluster_tolerance: e.cluster_tolerance,
            complete_clusters: e.complete_clusters,
            seed: e.seed,
        }
    }
}

impl EigenSection {
    pub fn to_config(&self) -> EigenConfig {
        EigenConfig {
            dense_max: self.dense_max,
            block_size: self.block_size,
            tolerance: self.tolerance,
            cluster_tolerance: self.cluster_tolerance,
            complete_clusters: self.complete_clusters,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub meshes: Vec<MeshEntry>,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c: RunConfig = serde_json::from_str(text).map_err(|e| VhnError::Config(e.to_string()))?;
        c.resolve(base)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VhnError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut self.meshes {
            join(&mut m.mesh);
            if !m.mesh.is_file() {
                return Err(VhnError::Config(format!("mesh {} does not exist", m.mesh.display())));
            }
            if let Some(f) = &mut m.field {
                join(f);
                if !f.is_file() {
                    return Err(VhnError::Config(format!("field {} does not exist", f.display())));
                }
            }
        }
        if let Some(d) = &mut self.cache_dir {
            join(d);
        }
        if let Some(d) = &mut self.out_dir {
            join(d);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.features.to_spec()?;
        self.model.to_config(spec.channels())?;
        self.train.to_config(self.model.dropout, self.seed)?;
        Ok(())
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        self.features.to_spec().expect("validated at load")
    }

    pub fn vhn_config(&self) -> VhnConfig {
        self.model.to_config(self.feature_spec().channels()).expect("validated at load")
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.to_config(self.model.dropout, self.seed).expect("validated at load")
    }

    pub fn prep_settings(&self) -> PrepSettings {
        PrepSettings { features: self.feature_spec(), k: self.model.k, eigen: self.eigen.to_config() }
    }
}
