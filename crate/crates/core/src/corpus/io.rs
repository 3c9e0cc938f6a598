//! MIDV-style dataset directories.
//!
//! ```text
//! <root>/<video_id>/frames/NNN.png   (or .pgm / .ppm)
//! <root>/<video_id>/gt/NNN.json      {"quad": [[x1,y1],[x2,y2],[x3,y3],[x4,y4]]}
//! <root>/<video_id>/masks/NNN.png    written only; 0/255
//! <root>/<video_id>/meta.json        optional, {"attribute": "TS"}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use serde_json::{json, Value};

use super::{rasterize_quad, Frame, Mask, Quad, SceneAttribute, VideoSample};
use crate::error::{Error, Result};

const FRAME_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

fn list_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Reads an image file as an RGB frame; grayscale images are replicated
/// across channels.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    let rgb = img.to_rgb8();
    Ok(Frame {
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        data: rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
    })
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let bytes = frame.data.iter().map(|&v| to_u8(v)).collect();
    let img = RgbImage::from_raw(frame.width as u32, frame.height as u32, bytes)
        .expect("buffer matches frame extents");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

/// Writes a [0, 1] map as an 8-bit grayscale image; the format follows the
/// extension (`.png` or `.pgm`).
pub fn save_gray(values: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    let bytes = values.iter().map(|&v| to_u8(v)).collect();
    let img = GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::InvalidArgument(format!("{} values for a {width}×{height} image", values.len())))?;
    img.save(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

/// Writes a mask as 0/255 grayscale.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    save_gray(&mask.to_f64(), mask.width, mask.height, path)
}

fn parse_quad(path: &Path, text: &str) -> Result<Quad> {
    let malformed = |reason: String| Error::MalformedAnnotation {
        path: path.to_owned(),
        reason,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let points = value
        .get("quad")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing \"quad\" array".into()))?;
    if points.len() != 4 {
        return Err(malformed(format!("quad has {} points, expected 4", points.len())));
    }
    let mut quad = [[0.0; 2]; 4];
    for (q, p) in quad.iter_mut().zip(points) {
        let xy = p
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]))
            .ok_or_else(|| malformed(format!("point {p} is not an [x, y] pair")))?;
        *q = xy;
    }
    Ok(quad)
}

fn frame_number(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.parse().ok()
}

fn load_video(dir: &Path) -> Result<VideoSample> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut frame_paths: Vec<PathBuf> = list_dir(&dir.join("frames"))?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    // numeric order when every stem is a number, name order otherwise
    if frame_paths.iter().all(|p| frame_number(p).is_some()) {
        frame_paths.sort_by_key(|p| frame_number(p));
    }

    let attribute = match fs::read_to_string(dir.join("meta.json")) {
        Ok(text) => serde_json::from_str::<Value>(&text)?
            .get("attribute")
            .and_then(Value::as_str)
            .map(str::parse)
            .transpose()?
            .unwrap_or(SceneAttribute::TS),
        Err(_) => SceneAttribute::TS,
    };

    let mut sample = VideoSample {
        id,
        frames: Vec::new(),
        quads: Vec::new(),
        masks: Vec::new(),
        attribute,
    };
    for path in frame_paths {
        let stem = path.file_stem().expect("listed files have names");
        let gt = dir.join("gt").join(stem).with_extension("json");
        let text = fs::read_to_string(&gt).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingAnnotation(gt.clone()),
            _ => Error::io(&gt, e),
        })?;
        let quad = parse_quad(&gt, &text)?;
        let frame = load_frame(&path)?;
        if let Some((w, h)) = sample.frame_size() {
            if (frame.width, frame.height) != (w, h) {
                return Err(Error::FrameSize {
                    path,
                    expected: (w, h),
                    found: (frame.width, frame.height),
                });
            }
        }
        let mask = rasterize_quad(&quad, frame.height, frame.width)?;
        sample.frames.push(frame);
        sample.quads.push(quad);
        sample.masks.push(mask);
    }
    Ok(sample)
}

/// Loads every video subdirectory of `root` (those containing `frames/`),
/// in name order. Masks are rasterized from the annotated quads.
pub fn load_midv_dir(root: &Path) -> Result<Vec<VideoSample>> {
    let mut videos = Vec::new();
    for dir in list_dir(root)? {
        if dir.join("frames").is_dir() {
            let video = load_video(&dir)?;
            if !video.is_empty() {
                videos.push(video);
            }
        }
    }
    if videos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(videos)
}

/// Writes videos in the layout read by [`load_midv_dir`], plus mask images.
pub fn write_midv_dir(root: &Path, videos: &[VideoSample]) -> Result<()> {
    for video in videos {
        let dir = root.join(&video.id);
        for sub in ["frames", "gt", "masks"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let meta = dir.join("meta.json");
        fs::write(&meta, json!({ "attribute": video.attribute.to_string() }).to_string())
            .map_err(|e| Error::io(&meta, e))?;
        for (t, ((frame, quad), mask)) in video.frames.iter().zip(&video.quads).zip(&video.masks).enumerate() {
            let name = format!("{t:03}");
            save_frame(frame, &dir.join("frames").join(format!("{name}.png")))?;
            save_mask(mask, &dir.join("masks").join(format!("{name}.png")))?;
            let gt = dir.join("gt").join(format!("{name}.json"));
            fs::write(&gt, json!({ "quad": quad }).to_string()).map_err(|e| Error::io(&gt, e))?;
        }
    }
    Ok(())
}
