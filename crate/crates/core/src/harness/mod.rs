//! Orchestration: run configuration, training, evaluation, label
//! propagation and cross-validation.

mod cv;
mod eval;
mod propagate;
mod train;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_midv_dir, synth_video, AugmentParams, SceneAttribute, SynthSpec, VideoSample};
use crate::error::{Error, Result};
use crate::model::VsNetConfig;
use crate::nn::AdamConfig;
use crate::objectives::IouMode;

pub use cv::{cross_validate, CvReport, FoldResult};
pub use eval::{evaluate, score_frames, EvalOptions};
pub use propagate::{propagate_labels, PropagateParams, Propagated};
pub use train::{train, train_on, EpochLog, TrainLog, TrainOutcome};

/// A generated set of synthetic videos. Video `i` uses seed `seed + i` and
/// the attribute `attributes[i % attributes.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSet {
    pub videos: usize,
    pub size: usize,
    pub frames: usize,
    pub seed: u64,
    pub attributes: Vec<SceneAttribute>,
    /// Pixel noise σ applied to every video.
    pub noise_sigma: f64,
    /// Motion-blur length applied to every video.
    pub blur_length: usize,
}

impl Default for SynthSet {
    fn default() -> Self {
        SynthSet {
            videos: 10,
            size: 64,
            frames: 30,
            seed: 0,
            attributes: vec![SceneAttribute::TS],
            noise_sigma: 0.0,
            blur_length: 0,
        }
    }
}

impl SynthSet {
    pub fn specs(&self) -> Vec<SynthSpec> {
        (0..self.videos)
            .map(|i| {
                let attribute = self.attributes.get(i % self.attributes.len().max(1)).copied();
                let seed = self.seed + i as u64;
                let mut spec = match attribute {
                    Some(a) => SynthSpec::for_attribute(a, self.size, self.frames, seed),
                    None => SynthSpec::easy(self.size, self.frames, seed),
                };
                spec.noise_sigma = self.noise_sigma;
                spec.blur_length = self.blur_length;
                spec
            })
            .collect()
    }

    pub fn generate(&self) -> Result<Vec<VideoSample>> {
        if self.videos == 0 {
            return Err(Error::EmptyDataset);
        }
        self.specs().iter().map(synth_video).collect()
    }
}

/// Where training and evaluation videos come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A MIDV-style directory.
    Dir(PathBuf),
    Synth(SynthSet),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthSet::default())
    }
}

impl DataSource {
    pub fn load(&self) -> Result<Vec<VideoSample>> {
        match self {
            DataSource::Dir(path) => load_midv_dir(path),
            DataSource::Synth(set) => set.generate(),
        }
    }
}

/// Everything a training run needs. Serialized as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: VsNetConfig,
    pub adam: AdamConfig,
    pub batch: usize,
    pub epochs: usize,
    /// α, weight of the IoU loss term.
    pub alpha: f64,
    pub augment: AugmentParams,
    pub data: DataSource,
    /// Fraction of videos held out for validation.
    pub test_fraction: f64,
    /// Window centers drawn per video, evenly spaced; all frames if unset.
    pub frames_per_video: Option<usize>,
    /// Stop once the mean IoU on the training windows, and on the held-out
    /// windows when there are any, reaches this value.
    pub stop_at_iou: Option<f64>,
    pub iou_mode: IouMode,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: VsNetConfig::desk_scale(),
            adam: AdamConfig::default(),
            batch: 8,
            epochs: 100,
            alpha: 1.0,
            augment: AugmentParams::default(),
            data: DataSource::default(),
            test_fraction: 0.3,
            frames_per_video: None,
            stop_at_iou: None,
            iou_mode: IouMode::Mask,
            seed: 0,
            out_dir: None,
        }
    }
}

impl RunConfig {
    /// Full-resolution settings: 256×256 frames, full-width network, batch
    /// 128.
    pub fn paper_scale() -> Self {
        let mut config = RunConfig {
            model: VsNetConfig::full_scale(),
            batch: 128,
            ..RunConfig::default()
        };
        config.data = DataSource::Synth(SynthSet {
            size: 256,
            ..SynthSet::default()
        });
        config
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.adam.validate()?;
        if !(self.adam.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidConfig(format!(
                "epochs ({}) and batch ({}) must be at least 1",
                self.epochs, self.batch
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("α must be non-negative, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidConfig(format!("test fraction {} not in [0, 1)", self.test_fraction)));
        }
        if self.frames_per_video == Some(0) {
            return Err(Error::InvalidConfig("frames_per_video must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Evenly spaced window centers for a video of `len` frames.
pub fn frame_centers(len: usize, per_video: Option<usize>) -> Vec<usize> {
    match per_video {
        Some(n) if n < len => {
            if n == 1 {
                return vec![len / 2];
            }
            (0..n).map(|i| (i * (len - 1) + (n - 1) / 2) / (n - 1)).collect()
        }
        _ => (0..len).collect(),
    }
}
