use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateParams {
    /// Pixels at or above this value are foreground seeds.
    pub fg_thresh: f64,
    /// Pixels at or below this value are background seeds.
    pub bg_thresh: f64,
    pub iterations: usize,
}

impl Default for PropagateParams {
    fn default() -> Self {
        PropagateParams {
            fg_thresh: 0.8,
            bg_thresh: 0.2,
            iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    pub map: Vec<f64>,
    /// Set when the input had no seed pixels; `map` is then the input.
    pub no_seeds: bool,
}

/// Seeded label propagation. Seeds are pinned to 1 (foreground) or 0
/// (background); every other pixel is repeatedly replaced by the mean of
/// its in-image 4-neighbors (Jacobi sweeps).
pub fn propagate_labels(saliency: &[f64], width: usize, height: usize, params: &PropagateParams) -> Result<Propagated> {
    if saliency.len() != width * height {
        return Err(Error::shape("propagate_labels", &[height, width], &[saliency.len()]));
    }
    if let Some(v) = saliency.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("saliency value {v} outside [0, 1]")));
    }
    if !(params.fg_thresh > params.bg_thresh) {
        return Err(Error::InvalidArgument(format!(
            "foreground threshold {} must exceed background threshold {}",
            params.fg_thresh, params.bg_thresh
        )));
    }
    let seed = |v: f64| {
        if v >= params.fg_thresh {
            Some(1.0)
        } else if v <= params.bg_thresh {
            Some(0.0)
        } else {
            None
        }
    };
    let seeds: Vec<Option<f64>> = saliency.iter().map(|&v| seed(v)).collect();
    if seeds.iter().all(Option::is_none) {
        return Ok(Propagated {
            map: saliency.to_vec(),
            no_seeds: true,
        });
    }

    let mut cur: Vec<f64> = saliency.iter().zip(&seeds).map(|(&v, s)| s.unwrap_or(v)).collect();
    let mut next = cur.clone();
    for _ in 0..params.iterations {
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if seeds[i].is_some() {
                    continue;
                }
                let (mut sum, mut n) = (0.0, 0.0);
                if x > 0 {
                    sum += cur[i - 1];
                    n += 1.0;
                }
                if x + 1 < width {
                    sum += cur[i + 1];
                    n += 1.0;
                }
                if y > 0 {
                    sum += cur[i - width];
                    n += 1.0;
                }
                if y + 1 < height {
                    sum += cur[i + width];
                    n += 1.0;
                }
                if n > 0.0 {
                    next[i] = sum / n;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Propagated {
        map: cur,
        no_seeds: false,
    })
}
