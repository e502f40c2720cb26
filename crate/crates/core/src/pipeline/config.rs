use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrast::{CropParams, KeyConfig, DEFAULT_BINS, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::synthdata::SynthConfig;

/// Update rule of the contrast stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastOptimizer {
    Sgd,
    Lars,
}

impl ContrastOptimizer {
    /// The name recorded in checkpoint metadata.
    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => super::checkpoint::OPTIMIZER,
            Self::Lars => "lars_momentum",
        }
    }
}

/// Every knob of a three-stage run. Field names double as config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Label every `interval`-th frame.
    pub interval: usize,
    pub n_adjacent: usize,
    pub n_other_video: usize,
    pub n_views: usize,
    pub momentum_coeff: f32,
    pub crop_min: f32,
    pub crop_max: f32,
    pub flip_prob: f64,
    pub pretrain_epochs: usize,
    pub contrast_epochs: usize,
    pub finetune_epochs: usize,
    pub pretrain_lr: f32,
    pub contrast_lr: f32,
    pub finetune_lr: f32,
    pub contrast_optimizer: ContrastOptimizer,
    /// LARS trust coefficient η.
    pub lars_trust: f32,
    /// Linear learning-rate warmup at the start of the contrast stage.
    pub contrast_warmup_epochs: usize,
    /// Leading contrast epochs that update only the projection head.
    pub projector_warmup_epochs: usize,
    pub poly_power: f32,
    pub sgd_momentum: f32,
    pub weight_decay: f32,
    pub ohem_tau: f32,
    /// Minimum kept pixels as a fraction of the frame.
    pub ohem_k_min: f32,
    pub batch_size: usize,
    pub seed: u64,
    pub shot_bins: usize,
    pub shot_threshold: f32,
    /// Query pixels sampled per view in the contrast loss.
    pub k_max: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub holdout_video: usize,
    /// Held-out mIoU is logged every this many epochs and after the last; 0 logs only the last.
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interval: 10,
            n_adjacent: 1,
            n_other_video: 4,
            n_views: 1,
            momentum_coeff: 0.99,
            crop_min: 0.3,
            crop_max: 0.7,
            flip_prob: 0.5,
            pretrain_epochs: 40,
            contrast_epochs: 60,
            finetune_epochs: 40,
            pretrain_lr: 1e-2,
            contrast_lr: 1e-3,
            finetune_lr: 1e-2,
            contrast_optimizer: ContrastOptimizer::Sgd,
            lars_trust: 1e-3,
            contrast_warmup_epochs: 10,
            projector_warmup_epochs: 5,
            poly_power: 0.9,
            sgd_momentum: 0.9,
            weight_decay: 1e-5,
            ohem_tau: 0.7,
            ohem_k_min: 0.25,
            batch_size: 4,
            seed: 0,
            shot_bins: DEFAULT_BINS,
            shot_threshold: DEFAULT_THRESHOLD,
            k_max: 256,
            feature_dim: 32,
            embed_dim: 16,
            holdout_video: 5,
            eval_every: 10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.interval == 0 {
            return bad("interval must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.momentum_coeff) {
            return bad(format!("momentum_coeff {} outside [0, 1]", self.momentum_coeff));
        }
        if !(self.crop_min > 0.0 && self.crop_min <= self.crop_max && self.crop_max <= 1.0) {
            return bad(format!("crop range ({}, {}) must satisfy 0 < min <= max <= 1", self.crop_min, self.crop_max));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip_prob {} outside [0, 1]", self.flip_prob));
        }
        for (name, lr) in [
            ("pretrain_lr", self.pretrain_lr),
            ("contrast_lr", self.contrast_lr),
            ("finetune_lr", self.finetune_lr),
            ("weight_decay", self.weight_decay),
            ("sgd_momentum", self.sgd_momentum),
            ("lars_trust", self.lars_trust),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {lr}"));
            }
        }
        if !(self.ohem_tau >= 0.0) || !(self.ohem_k_min > 0.0 && self.ohem_k_min <= 1.0) {
            return bad(format!(
                "ohem_tau must be >= 0 and ohem_k_min in (0, 1], got {} and {}",
                self.ohem_tau, self.ohem_k_min
            ));
        }
        if self.batch_size == 0 || self.k_max == 0 {
            return bad("batch_size and k_max must be >= 1".into());
        }
        if self.shot_bins < 2 || !(self.shot_threshold >= 0.0) {
            return bad(format!("shot detector needs bins >= 2 and threshold >= 0, got {} and {}", self.shot_bins, self.shot_threshold));
        }
        if self.feature_dim < 2 || self.embed_dim < 2 {
            return bad("feature_dim and embed_dim must be >= 2".into());
        }
        Ok(())
    }

    pub fn key_config(&self) -> KeyConfig {
        KeyConfig {
            n_adjacent: self.n_adjacent,
            n_other_video: self.n_other_video,
            n_views: self.n_views,
            crop: self.crop_params(),
        }
    }

    pub fn crop_params(&self) -> CropParams {
        CropParams {
            crop_min: self.crop_min,
            crop_max: self.crop_max,
            flip_prob: self.flip_prob,
        }
    }

    /// `ceil(k_min · pixels)`, at least one.
    pub fn ohem_min_kept(&self, pixels: usize) -> usize {
        ((self.ohem_k_min as f64 * pixels as f64).ceil() as usize).clamp(1, pixels)
    }
}

/// Dataset and run settings together; what a config file describes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExperimentConfig {
    pub data: SynthConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Sets both the dataset and the run seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.run.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.run.validate()?;
        if self.run.holdout_video >= self.data.num_videos {
            return Err(Error::Config(format!(
                "holdout_video {} but only {} videos",
                self.run.holdout_video, self.data.num_videos
            )));
        }
        Ok(())
    }

    /// Canonical `key = value` text, sorted by key.
    pub fn to_text(&self) -> String {
        let mut entries = std::collections::BTreeMap::new();
        for value in [serde_json::to_value(&self.data), serde_json::to_value(&self.run)] {
            if let Ok(serde_json::Value::Object(map)) = value {
                entries.extend(map);
            }
        }
        entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
