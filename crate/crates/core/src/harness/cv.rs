use std::fs;
use std::io::Write;
use std::path::Path;

use super::{evaluate, train_on, EvalOptions, RunConfig};
use crate::corpus::{kfold, VideoSample};
use crate::error::{Error, Result};
use crate::objectives::MetricsReport;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl CvReport {
    /// Mean and sample standard deviation of per-fold accuracy.
    pub fn accuracy(&self) -> (f64, f64) {
        mean_std(&self.folds.iter().map(|f| f.report.accuracy).collect::<Vec<_>>())
    }

    /// Mean and sample standard deviation of per-fold mean IoU.
    pub fn mean_iou(&self) -> (f64, f64) {
        mean_std(&self.folds.iter().map(|f| f.report.mean_iou()).collect::<Vec<_>>())
    }

    /// CSV with columns `fold,videos,mean_iou,mean_loss,accuracy`: one row
    /// per fold, then `mean` and `std` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fold", "videos", "mean_iou", "mean_loss", "accuracy"])?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.test_ids.join(" "),
                f.report.mean_iou().to_string(),
                f.report.mean_loss.to_string(),
                f.report.accuracy.to_string(),
            ])?;
        }
        let losses: Vec<f64> = self.folds.iter().map(|f| f.report.mean_loss).collect();
        let (iou, loss, acc) = (self.mean_iou(), mean_std(&losses), self.accuracy());
        w.write_record(["mean".into(), String::new(), iou.0.to_string(), loss.0.to_string(), acc.0.to_string()])?;
        w.write_record(["std".into(), String::new(), iou.1.to_string(), loss.1.to_string(), acc.1.to_string()])?;
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// k-fold cross-validation at video granularity: trains one model per fold
/// on the other folds and evaluates its final parameters on the fold. With
/// `config.out_dir` set, writes `fold_<i>/` run artifacts with
/// `metrics.csv`, plus `cv.csv`.
pub fn cross_validate(config: &RunConfig, videos: &[VideoSample], k: usize) -> Result<CvReport> {
    config.validate()?;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    let folds = kfold(videos.len(), k, config.seed)?;
    let mut results = Vec::with_capacity(k);
    for (i, test_idx) in folds.iter().enumerate() {
        let test: Vec<VideoSample> = test_idx.iter().map(|&j| videos[j].clone()).collect();
        let train: Vec<VideoSample> = (0..videos.len())
            .filter(|j| !test_idx.contains(j))
            .map(|j| videos[j].clone())
            .collect();
        let mut fold_config = config.clone();
        fold_config.out_dir = config.out_dir.as_ref().map(|d| d.join(format!("fold_{i}")));
        log::info!("fold {i}: training on {} videos, testing on {}", train.len(), test.len());
        let outcome = train_on(&fold_config, &train, &[])?;
        let options = EvalOptions {
            iou_mode: config.iou_mode,
            alpha: config.alpha,
            frames_per_video: config.frames_per_video,
            ..EvalOptions::default()
        };
        let report = evaluate(&outcome.model, &test, &options)?;
        if let Some(dir) = &fold_config.out_dir {
            report.save_csv(&dir.join("metrics.csv"))?;
        }
        results.push(FoldResult {
            fold: i,
            test_ids: test.iter().map(|v| v.id.clone()).collect(),
            report,
        });
    }
    let report = CvReport { folds: results };
    if let Some(dir) = &config.out_dir {
        report.save_csv(&dir.join("cv.csv"))?;
    }
    Ok(report)
}
