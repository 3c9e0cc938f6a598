use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{Mode, VsNet};
use crate::tensor::Tensor;

/// Untimed forward passes run before measuring.
pub const DEFAULT_WARMUP: usize = 3;

/// Inference timing for one saliency prediction per step.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub fps: f64,
    pub ms_per_step: f64,
    /// Wall-clock milliseconds of every timed step.
    pub samples_ms: Vec<f64>,
    pub warmup: usize,
}

impl BenchResult {
    /// Relative spread `(max − min) / mean` of the timed steps.
    pub fn spread(&self) -> f64 {
        let max = self.samples_ms.iter().copied().fold(f64::MIN, f64::max);
        let min = self.samples_ms.iter().copied().fold(f64::MAX, f64::min);
        (max - min) / self.ms_per_step
    }
}

/// Times `repeats` inference passes over an in-memory window, batch 1, on
/// the calling thread only. Frames must already be decoded; no I/O is timed.
pub fn benchmark(model: &VsNet, frames: &[Tensor], repeats: usize, warmup: usize) -> Result<BenchResult> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("benchmark needs at least one repeat".into()));
    }
    let params = model.bind(false);
    for _ in 0..warmup {
        model.forward_window(&params, frames, Mode::Inference)?;
    }
    let mut samples_ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let out = model.forward_window(&params, frames, Mode::Inference)?;
        std::hint::black_box(out.saliency.data());
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let ms_per_step = samples_ms.iter().sum::<f64>() / repeats as f64;
    Ok(BenchResult {
        fps: 1000.0 / ms_per_step,
        ms_per_step,
        samples_ms,
        warmup,
    })
}
