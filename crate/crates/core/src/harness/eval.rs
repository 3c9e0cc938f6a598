use std::fs;
use std::path::PathBuf;

use super::train::window;
use super::{frame_centers, propagate_labels, PropagateParams};
use crate::corpus::{save_gray, Mask, VideoSample};
use crate::error::{Error, Result};
use crate::model::VsNet;
use crate::objectives::{iou_metric, total_loss, FrameMetrics, IouMode, LossWeights, MetricsReport};
use crate::tensor::Tensor;

/// Evaluation settings. The default applies no refinement and writes no
/// images.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub iou_mode: IouMode,
    /// Detection threshold on per-frame IoU.
    pub threshold: f64,
    /// α used for the reported loss.
    pub alpha: f64,
    /// Label-propagation refinement of each saliency map.
    pub refine: Option<PropagateParams>,
    /// Saliency maps are written to `<dir>/<video_id>/NNN.<ext>`.
    pub saliency_dir: Option<PathBuf>,
    /// `png` or `pgm`.
    pub image_ext: String,
    pub frames_per_video: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_mode: IouMode::Mask,
            threshold: 0.5,
            alpha: 1.0,
            refine: None,
            saliency_dir: None,
            image_ext: "png".into(),
            frames_per_video: None,
        }
    }
}

/// Scores saliency maps against ground-truth masks. Each item is a frame
/// name, a row-major saliency map and its mask. Frames whose prediction and
/// ground truth are both empty have no defined IoU and are skipped with a
/// warning.
pub fn score_frames<'a>(
    items: impl IntoIterator<Item = (String, Vec<f64>, &'a Mask)>,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    let weights = LossWeights {
        iou: options.alpha,
        kl: 0.0,
    };
    let mut rows = Vec::new();
    for (name, saliency, mask) in items {
        let shape = [1, 1, mask.height, mask.width];
        let gt = mask.to_f64();
        let iou = match iou_metric(&saliency, &gt, mask.width, options.iou_mode) {
            Ok(v) => v,
            Err(Error::EmptyUnion) => {
                log::warn!("skipping {name}: prediction and ground truth are both empty");
                continue;
            }
            Err(e) => return Err(e),
        };
        let s = Tensor::new(&shape, saliency)?;
        let g = Tensor::new(&shape, gt)?;
        let loss = total_loss(&s, &g, weights, None)?.item()?;
        rows.push(FrameMetrics { frame: name, iou, loss });
    }
    MetricsReport::from_frames(rows, options.threshold)
}

/// Runs the model over every (or every sampled) frame of `videos` and
/// scores the center-frame saliency.
pub fn evaluate(model: &VsNet, videos: &[VideoSample], options: &EvalOptions) -> Result<MetricsReport> {
    let window_len = model.config().arp_window;
    let mut items = Vec::new();
    for video in videos {
        let dir = options.saliency_dir.as_ref().map(|d| d.join(&video.id));
        if let Some(dir) = &dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        for center in frame_centers(video.len(), options.frames_per_video) {
            let (frames, _) = window(video, center, window_len);
            let mask = &video.masks[center];
            let mut saliency = model.predict(&frames)?.to_vec();
            if let Some(params) = &options.refine {
                let refined = propagate_labels(&saliency, mask.width, mask.height, params)?;
                if refined.no_seeds {
                    log::warn!("{}/{center:03}: no seeds, refinement skipped", video.id);
                }
                saliency = refined.map;
            }
            if let Some(dir) = &dir {
                let path = dir.join(format!("{center:03}.{}", options.image_ext));
                save_gray(&saliency, mask.width, mask.height, &path)?;
            }
            items.push((format!("{}/{center:03}", video.id), saliency, mask));
        }
    }
    score_frames(items, options)
}
