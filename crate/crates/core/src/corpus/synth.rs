//! Procedural document videos: a textured "ID card" moving over a scene.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{rasterize_quad, Frame, Quad, SceneAttribute, VideoSample};
use crate::error::{Error, Result};
use crate::model::mix_seed;

/// Document motion per frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Motion {
    /// Pixels per frame, `[x, y]`.
    pub velocity: [f64; 2],
    /// Degrees per frame.
    pub rotation_rate: f64,
}

/// Parameters of one synthetic video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Square frame side in pixels.
    pub size: usize,
    pub frames: usize,
    /// Document extent as fractions of the frame side.
    pub doc_width: f64,
    pub doc_height: f64,
    /// Initial document center as fractions of the frame side.
    pub start: [f64; 2],
    /// Initial rotation in degrees.
    pub rotation: f64,
    pub motion: Motion,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    /// Length in pixels of the motion-blur kernel; 0 or 1 disables blur.
    pub blur_length: usize,
    /// Strength in [0, 1] of a linear illumination falloff across the frame.
    pub illumination: f64,
    /// Let the document leave the frame instead of bouncing off the border.
    pub partial: bool,
    /// Number of document-like distractors in the scene.
    pub clutter: usize,
    pub attribute: SceneAttribute,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            size: 64,
            frames: 30,
            doc_width: 0.55,
            doc_height: 0.38,
            start: [0.5, 0.5],
            rotation: 0.0,
            motion: Motion::default(),
            noise_sigma: 0.0,
            blur_length: 0,
            illumination: 0.0,
            partial: false,
            clutter: 0,
            attribute: SceneAttribute::TS,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// A table scene with a seeded document size, pose and slow drift, and
    /// no challenges.
    pub fn easy(size: usize, frames: usize, seed: u64) -> SynthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5EED));
        let speed = rng.random_range(0.0..0.6);
        let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        SynthSpec {
            size,
            frames,
            doc_width: rng.random_range(0.42..0.62),
            doc_height: rng.random_range(0.28..0.42),
            start: [rng.random_range(0.4..0.6), rng.random_range(0.4..0.6)],
            rotation: rng.random_range(-20.0..20.0),
            motion: Motion {
                velocity: [speed * heading.cos(), speed * heading.sin()],
                rotation_rate: rng.random_range(-0.5..0.5),
            },
            seed,
            ..SynthSpec::default()
        }
    }

    /// An easy video adjusted to show the challenge of `attribute`.
    pub fn for_attribute(attribute: SceneAttribute, size: usize, frames: usize, seed: u64) -> SynthSpec {
        let mut spec = SynthSpec::easy(size, frames, seed);
        spec.attribute = attribute;
        match attribute {
            SceneAttribute::TS | SceneAttribute::KS | SceneAttribute::HS => {}
            SceneAttribute::PS => {
                spec.partial = true;
                let heading = spec.motion.velocity[1].atan2(spec.motion.velocity[0]);
                let speed = 0.6 * size as f64 / frames.max(1) as f64;
                spec.motion.velocity = [speed * heading.cos(), speed * heading.sin()];
            }
            SceneAttribute::CS => spec.clutter = 3,
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.size == 0 {
            return Err(Error::InvalidArgument(format!(
                "synthetic video needs at least one frame of positive size, got {} frames of {}",
                self.frames, self.size
            )));
        }
        let (w, h) = self.doc_extent();
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::DegenerateDocument(format!(
                "document extent {w}×{h} px"
            )));
        }
        if !(self.noise_sigma >= 0.0) || !(0.0..=1.0).contains(&self.illumination) {
            return Err(Error::InvalidArgument(format!(
                "noise σ {} must be ≥ 0 and illumination {} in [0, 1]",
                self.noise_sigma, self.illumination
            )));
        }
        Ok(())
    }

    fn doc_extent(&self) -> (f64, f64) {
        (self.doc_width * self.size as f64, self.doc_height * self.size as f64)
    }

    /// Document center and rotation (radians) at frame `t`.
    fn pose(&self, t: usize) -> ([f64; 2], f64) {
        let size = self.size as f64;
        let (w, h) = self.doc_extent();
        let radius = 0.5 * (w * w + h * h).sqrt();
        let center = [0, 1].map(|i| {
            let p = self.start[i] * size + self.motion.velocity[i] * t as f64;
            if self.partial {
                p
            } else {
                fold(p, radius, size - radius)
            }
        });
        let angle = (self.rotation + self.motion.rotation_rate * t as f64).to_radians();
        (center, angle)
    }

    /// Document corners at frame `t`, clockwise on screen from top-left.
    pub fn quad_at(&self, t: usize) -> Quad {
        let (c, angle) = self.pose(t);
        let (w, h) = self.doc_extent();
        let (s, co) = angle.sin_cos();
        [[-w, -h], [w, -h], [w, h], [-w, h]].map(|[x, y]| {
            [c[0] + 0.5 * (x * co - y * s), c[1] + 0.5 * (x * s + y * co)]
        })
    }
}

/// Reflects `p` back into `[lo, hi]` as if bouncing between the walls.
fn fold(p: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return 0.5 * (lo + hi);
    }
    let r = (p - lo).rem_euclid(2.0 * span);
    lo + if r > span { 2.0 * span - r } else { r }
}

/// Integer hash for procedural patterns.
fn hash2(a: i64, b: i64, seed: u64) -> u64 {
    mix_seed(seed ^ (a as u64).wrapping_mul(0x9E37_79B9), b as u64)
}

struct Scene {
    paper: [f64; 3],
    ink: [f64; 3],
    photo: [f64; 3],
    text_seed: u64,
    background: Frame,
    distractors: Vec<(Quad, [f64; 3])>,
    light_dir: [f64; 2],
}

fn scene(spec: &SynthSpec) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size = spec.size;
    let tint: f64 = rng.random_range(-0.04..0.04);
    let paper = [0.9 + tint, 0.88, 0.85 - tint];
    let ink = [0.12, 0.12, rng.random_range(0.12..0.3)];
    let photo = [rng.random_range(0.45..0.7), rng.random_range(0.35..0.5), 0.35];
    let text_seed = rng.random();

    let mut background = Frame::filled(size, size, [0.0; 3]);
    let wood = [
        rng.random_range(0.35..0.5),
        rng.random_range(0.22..0.32),
        rng.random_range(0.12..0.2),
    ];
    let grain_freq = rng.random_range(0.15..0.35);
    let grain_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let checker = [rng.random_range(0.1..0.5), rng.random_range(0.1..0.5), rng.random_range(0.1..0.5)];
    let key = (size / 10).max(3);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            let rgb = match spec.attribute {
                SceneAttribute::KS => {
                    let on_key = x % key != 0 && y % key != 0;
                    if on_key { [0.32; 3] } else { [0.1; 3] }
                }
                SceneAttribute::CS => {
                    let cell = ((x / key + y / key) % 2) as f64;
                    let v = 0.6 + 0.4 * cell;
                    checker.map(|c| c * v + 0.15 * (1.0 - v))
                }
                _ => {
                    let grain = 0.85 + 0.15 * (fy * grain_freq + 0.3 * (fx * 0.07).sin() + grain_phase).sin();
                    wood.map(|c| c * grain)
                }
            };
            background.set_pixel(x, y, rgb);
        }
    }
    if spec.attribute == SceneAttribute::HS {
        // a hand-colored ellipse partly under the document
        let (c, _) = spec.pose(0);
        let (w, h) = spec.doc_extent();
        let (hx, hy) = (c[0] - 0.45 * w, c[1] + 0.45 * h);
        let (rx, ry) = (0.18 * size as f64, 0.26 * size as f64);
        for y in 0..size {
            for x in 0..size {
                let dx = (x as f64 + 0.5 - hx) / rx;
                let dy = (y as f64 + 0.5 - hy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    background.set_pixel(x, y, [0.86, 0.64, 0.52]);
                }
            }
        }
    }

    let mut distractors = Vec::with_capacity(spec.clutter);
    let s = size as f64;
    for _ in 0..spec.clutter {
        let (w, h) = (rng.random_range(0.12..0.25) * s, rng.random_range(0.1..0.2) * s);
        let c = [rng.random_range(0.0..s), rng.random_range(0.0..s)];
        let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (sa, ca) = a.sin_cos();
        let quad = [[-w, -h], [w, -h], [w, h], [-w, h]]
            .map(|[x, y]| [c[0] + 0.5 * (x * ca - y * sa), c[1] + 0.5 * (x * sa + y * ca)]);
        let gray = rng.random_range(0.55..0.75);
        distractors.push((quad, [gray, gray * 0.95, gray * 0.9]));
    }
    let light: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Scene {
        paper,
        ink,
        photo,
        text_seed,
        background,
        distractors,
        light_dir: [light.cos(), light.sin()],
    }
}

/// Document texture at local coordinates `(u, v)` in pixels from the
/// top-left corner of a `w × h` card.
fn texture(scene: &Scene, u: f64, v: f64, w: f64, h: f64) -> [f64; 3] {
    let (fu, fv) = (u / w, v / h);
    if (0.06..0.3).contains(&fu) && (0.2..0.75).contains(&fv) {
        return scene.photo;
    }
    let line = (h / 7.0).max(3.0);
    let row = (v / line).floor();
    let in_band = v - row * line < 0.45 * line;
    let text_area = fu > 0.36 && fu < 0.94 && fv > 0.12 && fv < 0.9;
    if in_band && text_area {
        let word = (u / (0.09 * w).max(2.0)).floor();
        if !hash2(row as i64, word as i64, scene.text_seed).is_multiple_of(4) {
            return scene.ink;
        }
    }
    scene.paper
}

fn motion_blur(frame: &Frame, length: usize, dir: [f64; 2]) -> Frame {
    let (w, h) = (frame.width as isize, frame.height as isize);
    let mut out = frame.clone();
    let half = (length as f64 - 1.0) / 2.0;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for k in 0..length {
                let o = k as f64 - half;
                let sx = (x + (o * dir[0]).round() as isize).clamp(0, w - 1);
                let sy = (y + (o * dir[1]).round() as isize).clamp(0, h - 1);
                let p = frame.pixel(sx as usize, sy as usize);
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
            }
            out.set_pixel(x as usize, y as usize, acc.map(|a| a / length as f64));
        }
    }
    out
}

/// Renders a synthetic document video. Per frame, the scene is drawn, then
/// illumination, motion blur and noise are applied in that order. Masks are
/// rasterized from the same quads that place the document.
pub fn synth_video(spec: &SynthSpec) -> Result<VideoSample> {
    spec.validate()?;
    let scene = scene(spec);
    let size = spec.size;
    let (w, h) = spec.doc_extent();
    let speed = spec.motion.velocity[0].hypot(spec.motion.velocity[1]);
    let blur_dir = if speed > 0.0 {
        spec.motion.velocity.map(|v| v / speed)
    } else {
        [1.0, 0.0]
    };
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut sample = VideoSample {
        id: format!("synth_{}", spec.seed),
        frames: Vec::with_capacity(spec.frames),
        quads: Vec::with_capacity(spec.frames),
        masks: Vec::with_capacity(spec.frames),
        attribute: spec.attribute,
    };
    let distractor_masks = scene
        .distractors
        .iter()
        .map(|(q, _)| rasterize_quad(q, size, size))
        .collect::<Result<Vec<_>>>()?;

    for t in 0..spec.frames {
        let quad = spec.quad_at(t);
        let mask = rasterize_quad(&quad, size, size)?;
        let mut frame = scene.background.clone();
        for ((_, color), m) in scene.distractors.iter().zip(&distractor_masks) {
            for y in 0..size {
                for x in (0..size).filter(|&x| m.get(x, y)) {
                    let stripe = if (x + 2 * y) % 5 < 2 { 0.8 } else { 1.0 };
                    frame.set_pixel(x, y, color.map(|c| c * stripe));
                }
            }
        }
        let (c, angle) = spec.pose(t);
        let (s, co) = angle.sin_cos();
        for y in 0..size {
            for x in (0..size).filter(|&x| mask.get(x, y)) {
                let (dx, dy) = (x as f64 + 0.5 - c[0], y as f64 + 0.5 - c[1]);
                let u = dx * co + dy * s + 0.5 * w;
                let v = -dx * s + dy * co + 0.5 * h;
                frame.set_pixel(x, y, texture(&scene, u, v, w, h));
            }
        }

        if spec.illumination > 0.0 {
            let [lx, ly] = scene.light_dir;
            for y in 0..size {
                for x in 0..size {
                    let ramp = 0.5 + 0.5 * ((x as f64 / size as f64 - 0.5) * lx + (y as f64 / size as f64 - 0.5) * ly) * std::f64::consts::SQRT_2;
                    let gain = 1.0 - spec.illumination * ramp.clamp(0.0, 1.0);
                    let p = frame.pixel(x, y);
                    frame.set_pixel(x, y, p.map(|v| v * gain));
                }
            }
        }
        if spec.blur_length > 1 {
            frame = motion_blur(&frame, spec.blur_length, blur_dir);
        }
        if spec.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 1_000 + t as u64));
            frame
                .data
                .iter_mut()
                .for_each(|v| *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0));
        }
        sample.frames.push(frame);
        sample.quads.push(quad);
        sample.masks.push(mask);
    }
    Ok(sample)
}
