use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Frame, Mask};
use crate::error::{Error, Result};

/// Augmentation ranges. Shifts and rotations are Gaussian with standard
/// deviation half the maximum, truncated at the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    /// Pixels.
    pub max_shift: f64,
    /// Degrees.
    pub max_rotation: f64,
    /// Standard deviation of additive gray-value noise.
    pub noise_sigma: f64,
}

impl AugmentParams {
    pub fn is_identity(&self) -> bool {
        self.max_shift == 0.0 && self.max_rotation == 0.0 && self.noise_sigma == 0.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_shift >= 0.0 && self.max_rotation >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("augmentation ranges must be non-negative: {self:?}")));
        }
        Ok(())
    }

    /// Draws a rigid transform.
    pub fn sample_transform(&self, rng: &mut ChaCha8Rng) -> Result<RigidTransform> {
        self.validate()?;
        let mut draw = |max: f64| -> Result<f64> {
            if max == 0.0 {
                return Ok(0.0);
            }
            let n = Normal::new(0.0, max / 2.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(n.sample(rng).clamp(-max, max))
        };
        Ok(RigidTransform {
            dx: draw(self.max_shift)?,
            dy: draw(self.max_shift)?,
            angle: draw(self.max_rotation)?,
        })
    }
}

/// Rotation by `angle` degrees about the image center followed by a shift.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub dx: f64,
    pub dy: f64,
    pub angle: f64,
}

impl RigidTransform {
    /// Source pixel for destination `(x, y)` by nearest-neighbor inverse
    /// mapping of pixel centers, or `None` if it falls outside.
    fn source(&self, x: usize, y: usize, width: usize, height: usize) -> Option<(usize, usize)> {
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        let (px, py) = (x as f64 + 0.5 - cx - self.dx, y as f64 + 0.5 - cy - self.dy);
        let (s, c) = self.angle.to_radians().sin_cos();
        let sx = (c * px + s * py + cx).floor();
        let sy = (-s * px + c * py + cy).floor();
        let inside = (0.0..width as f64).contains(&sx) && (0.0..height as f64).contains(&sy);
        inside.then_some((sx as usize, sy as usize))
    }

    /// Resamples a frame; uncovered pixels become black.
    pub fn apply_frame(&self, frame: &Frame) -> Frame {
        let mut out = Frame::filled(frame.width, frame.height, [0.0; 3]);
        for y in 0..frame.height {
            for x in 0..frame.width {
                if let Some((sx, sy)) = self.source(x, y, frame.width, frame.height) {
                    out.set_pixel(x, y, frame.pixel(sx, sy));
                }
            }
        }
        out
    }

    /// Resamples a mask; uncovered pixels become background.
    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        let mut out = Mask::zeros(mask.width, mask.height);
        for y in 0..mask.height {
            for x in 0..mask.width {
                if let Some((sx, sy)) = self.source(x, y, mask.width, mask.height) {
                    out.data[y * mask.width + x] = mask.data[sy * mask.width + sx];
                }
            }
        }
        out
    }
}

/// Applies one seeded rigid transform to a frame and its mask, then adds
/// Gaussian gray-value noise to the frame only.
pub fn augment(frame: &Frame, mask: &Mask, params: &AugmentParams, seed: u64) -> Result<(Frame, Mask)> {
    if (frame.width, frame.height) != (mask.width, mask.height) {
        return Err(Error::shape(
            "augment",
            &[frame.height, frame.width],
            &[mask.height, mask.width],
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transform = params.sample_transform(&mut rng)?;
    let mut out = transform.apply_frame(frame);
    add_gray_noise(&mut out, params.noise_sigma, &mut rng)?;
    Ok((out, transform.apply_mask(mask)))
}

/// Adds one Gaussian offset per pixel to all three channels, clamping to
/// [0, 1]. `sigma = 0` leaves the frame untouched.
pub fn add_gray_noise(frame: &mut Frame, sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let n = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for px in frame.data.chunks_exact_mut(3) {
        let delta = n.sample(rng);
        px.iter_mut().for_each(|v| *v = (*v + delta).clamp(0.0, 1.0));
    }
    Ok(())
}
