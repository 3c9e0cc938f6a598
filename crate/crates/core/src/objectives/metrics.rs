use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    /// Tight pixel box around the foreground (> 0.5) of a row-major mask,
    /// or `None` if the mask is empty.
    pub fn from_mask(mask: &[f64], width: usize) -> Option<BBox> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in mask.iter().enumerate().filter(|(_, &v)| v > 0.5) {
            let (x, y) = (i % width, i / width);
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bounds.map(|(x0, y0, x1, y1)| {
            BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64)
        })
    }
}

/// Box intersection over union.
pub fn bbox_iou(a: &BBox, b: &BBox) -> Result<f64> {
    let inter = BBox::new(a.x0.max(b.x0), a.y0.max(b.y0), a.x1.min(b.x1), a.y1.min(b.y1)).area();
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter / union)
}

/// Mask IoU after binarizing the prediction at 0.5 (`≥ 0.5` is foreground).
pub fn mask_iou(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::shape("mask_iou", &[pred.len()], &[gt.len()]));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (p, g) = (p >= 0.5, g >= 0.5);
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    if union == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// How predictions are compared with ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    /// Pixel masks.
    #[default]
    Mask,
    /// Bounding boxes of the two foregrounds.
    Bbox,
}

/// IoU of a saliency map against a binary ground-truth mask, both row-major
/// with the given width.
pub fn iou_metric(pred: &[f64], gt: &[f64], width: usize, mode: IouMode) -> Result<f64> {
    match mode {
        IouMode::Mask => mask_iou(pred, gt),
        IouMode::Bbox => {
            if pred.len() != gt.len() {
                return Err(Error::shape("iou_metric", &[pred.len()], &[gt.len()]));
            }
            let binary: Vec<f64> = pred.iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();
            match (BBox::from_mask(&binary, width), BBox::from_mask(gt, width)) {
                (None, None) => Err(Error::EmptyUnion),
                (Some(a), Some(b)) => bbox_iou(&a, &b),
                _ => Ok(0.0),
            }
        }
    }
}

/// Fraction of IoUs strictly above `threshold`.
pub fn detection_accuracy(ious: &[f64], threshold: f64) -> Result<f64> {
    if ious.is_empty() {
        return Err(Error::InvalidArgument("detection accuracy of no frames".into()));
    }
    let hits = ious.iter().filter(|&&v| v > threshold).count();
    Ok(hits as f64 / ious.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame: String,
    pub iou: f64,
    pub loss: f64,
}

/// Per-frame results plus summary statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub frames: Vec<FrameMetrics>,
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Timing is only filled in by benchmarks.
    pub fps: Option<f64>,
    pub ms_per_step: Option<f64>,
}

impl MetricsReport {
    /// Summarizes per-frame rows with detection threshold `threshold`.
    pub fn from_frames(frames: Vec<FrameMetrics>, threshold: f64) -> Result<Self> {
        let ious: Vec<f64> = frames.iter().map(|f| f.iou).collect();
        let accuracy = detection_accuracy(&ious, threshold)?;
        let mean_loss = frames.iter().map(|f| f.loss).sum::<f64>() / frames.len() as f64;
        Ok(MetricsReport {
            frames,
            accuracy,
            mean_loss,
            fps: None,
            ms_per_step: None,
        })
    }

    pub fn mean_iou(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(|f| f.iou).sum::<f64>() / self.frames.len() as f64
    }

    /// CSV with columns `frame,iou,loss,accuracy,fps,ms_per_step`: one row
    /// per frame, then a `summary` row carrying mean IoU, mean loss,
    /// accuracy and timing.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame", "iou", "loss", "accuracy", "fps", "ms_per_step"])?;
        for f in &self.frames {
            w.write_record([f.frame.clone(), f.iou.to_string(), f.loss.to_string(), String::new(), String::new(), String::new()])?;
        }
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            "summary".to_string(),
            self.mean_iou().to_string(),
            self.mean_loss.to_string(),
            self.accuracy.to_string(),
            opt(self.fps),
            opt(self.ms_per_step),
        ])?;
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}
