//! Document-video data: synthetic generation, MIDV-style directories,
//! quad rasterization, augmentation and video-level splits.

mod augment;
mod io;
mod raster;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use augment::{add_gray_noise, augment, AugmentParams, RigidTransform};
pub use io::{load_frame, load_midv_dir, save_frame, save_gray, save_mask, write_midv_dir};
pub use raster::rasterize_quad;
pub use split::{kfold, split_dataset, split_indices};
pub use synth::{synth_video, Motion, SynthSpec};

/// Four `[x, y]` pixel-coordinate vertices, clockwise on screen.
pub type Quad = [[f64; 2]; 4];

/// RGB image with values in [0, 1], stored row-major as H×W×3.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Frame {
        Frame {
            width,
            height,
            data: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// 1×3×H×W tensor.
    pub fn to_tensor(&self) -> Tensor {
        let hw = self.width * self.height;
        let mut out = vec![0.0; 3 * hw];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * hw + i] = px[c];
            }
        }
        Tensor::new(&[1, 3, self.height, self.width], out).expect("frame extents are positive")
    }
}

/// Binary mask stored row-major, one byte (0 or 1) per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// 1×1×H×W tensor of zeros and ones.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[1, 1, self.height, self.width], self.to_f64()).expect("mask extents are positive")
    }
}

/// Scene label of a video; action variants share the label of their scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SceneAttribute {
    /// Table
    TS,
    /// Keyboard
    KS,
    /// Hand-held
    HS,
    /// Partially visible
    PS,
    /// Cluttered
    CS,
}

impl SceneAttribute {
    pub const ALL: [SceneAttribute; 5] = [
        SceneAttribute::TS,
        SceneAttribute::KS,
        SceneAttribute::HS,
        SceneAttribute::PS,
        SceneAttribute::CS,
    ];
}

impl fmt::Display for SceneAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for SceneAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneAttribute::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scene attribute `{s}`")))
    }
}

/// One document video with per-frame annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub id: String,
    pub frames: Vec<Frame>,
    pub quads: Vec<Quad>,
    pub masks: Vec<Mask>,
    pub attribute: SceneAttribute,
}

impl VideoSample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame side lengths `(width, height)`.
    pub fn frame_size(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    /// Frame indices of a window of `len` frames centered on `center`, with
    /// edge frames replicated.
    pub fn window_indices(&self, center: usize, len: usize) -> Vec<usize> {
        let last = self.len().saturating_sub(1) as isize;
        let half = (len / 2) as isize;
        (0..len as isize)
            .map(|i| (center as isize + i - half).clamp(0, last) as usize)
            .collect()
    }
}
