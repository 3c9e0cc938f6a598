//! Training objective (BCE + soft IoU, optional KL) and evaluation metrics.

mod bench;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use bench::{benchmark, BenchResult, DEFAULT_WARMUP};
pub use metrics::{bbox_iou, detection_accuracy, iou_metric, mask_iou, BBox, FrameMetrics, IouMode, MetricsReport};

/// Predictions are clamped to `[EPS, 1 − EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

/// Weights of the terms in [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// α, weight of the IoU loss.
    pub iou: f64,
    /// β, weight of the KL regularizer.
    pub kl: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { iou: 1.0, kl: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou >= 0.0 && self.kl >= 0.0) {
            return Err(Error::InvalidConfig(format!("loss weights must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// How BCE reduces over pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

fn check_pair(op: &'static str, s: &Tensor, g: &Tensor) -> Result<()> {
    if !s.same_shape(g) {
        return Err(Error::shape(op, s.shape(), g.shape()));
    }
    if let Some(&v) = g.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryTarget(v));
    }
    Ok(())
}

/// Binary cross-entropy averaged over pixels.
pub fn bce_loss(s: &Tensor, g: &Tensor) -> Result<Tensor> {
    bce_loss_with(s, g, Reduction::Mean)
}

/// `−Σ [G log S + (1−G) log(1−S)]`, summed or averaged.
pub fn bce_loss_with(s: &Tensor, g: &Tensor, reduction: Reduction) -> Result<Tensor> {
    check_pair("bce_loss", s, g)?;
    let s = s.clamp(EPS, 1.0 - EPS)?;
    let pos = g.mul(&s.log()?)?;
    let neg = g.neg().add_scalar(1.0).mul(&s.neg().add_scalar(1.0).log()?)?;
    let total = pos.add(&neg)?;
    Ok(match reduction {
        Reduction::Mean => total.mean().neg(),
        Reduction::Sum => total.sum().neg(),
    })
}

/// Soft IoU loss `1 − ΣSG / Σ(S + G − SG)`.
pub fn iou_loss(s: &Tensor, g: &Tensor) -> Result<Tensor> {
    check_pair("iou_loss", s, g)?;
    if let Some(&v) = s.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("prediction {v} outside [0, 1]")));
    }
    let sg = s.mul(g)?;
    let union = s.add(g)?.sub(&sg)?.sum();
    if union.item()? == 0.0 {
        return Err(Error::EmptyUnion);
    }
    Ok(sg.sum().div(&union)?.neg().add_scalar(1.0))
}

/// `−0.5 · mean(1 + logσ² − μ² − exp logσ²)`.
pub fn kl_divergence(mu: &Tensor, logvar: &Tensor) -> Result<Tensor> {
    if !mu.same_shape(logvar) {
        return Err(Error::shape("kl_divergence", mu.shape(), logvar.shape()));
    }
    Ok(logvar
        .add_scalar(1.0)
        .sub(&mu.mul(mu)?)?
        .sub(&logvar.exp())?
        .mean()
        .scalar_mul(-0.5))
}

/// `bce + α·iou (+ β·KL)`. Terms with zero weight are not evaluated, so
/// `α = 0` gives exactly [`bce_loss`].
pub fn total_loss(
    s: &Tensor,
    g: &Tensor,
    weights: LossWeights,
    latent: Option<(&Tensor, &Tensor)>,
) -> Result<Tensor> {
    weights.validate()?;
    let mut loss = bce_loss(s, g)?;
    if weights.iou > 0.0 {
        loss = loss.add(&iou_loss(s, g)?.scalar_mul(weights.iou))?;
    }
    if weights.kl > 0.0 {
        let (mu, logvar) = latent.ok_or_else(|| {
            Error::InvalidArgument("KL weight is positive but no latent statistics were given".into())
        })?;
        loss = loss.add(&kl_divergence(mu, logvar)?.scalar_mul(weights.kl))?;
    }
    Ok(loss)
}
