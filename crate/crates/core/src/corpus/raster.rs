use super::{Mask, Quad};
use crate::error::{Error, Result};

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// True if segments `ab` and `cd` cross at a point interior to both.
fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Binary H×W mask of the pixels whose centers lie inside `quad` (even-odd
/// rule; centers on a left or top edge count as inside). Vertices may lie
/// outside the frame.
pub fn rasterize_quad(quad: &Quad, height: usize, width: usize) -> Result<Mask> {
    if quad.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite quad {quad:?}")));
    }
    if segments_cross(quad[0], quad[1], quad[2], quad[3])
        || segments_cross(quad[1], quad[2], quad[3], quad[0])
    {
        return Err(Error::SelfIntersectingQuad(*quad));
    }
    let mut mask = Mask::zeros(width, height);
    let mut xs = Vec::with_capacity(4);
    for y in 0..height {
        let cy = y as f64 + 0.5;
        xs.clear();
        for i in 0..4 {
            let (p, q) = (quad[i], quad[(i + 1) % 4]);
            // half-open in y so shared vertices are counted once
            if (p[1] <= cy) != (q[1] <= cy) {
                xs.push(p[0] + (cy - p[1]) / (q[1] - p[1]) * (q[0] - p[0]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            // centers x + 0.5 with span[0] <= x + 0.5 < span[1]
            let first = (span[0] - 0.5).ceil().max(0.0);
            let last = ((span[1] - 0.5).ceil() - 1.0).min(width as f64 - 1.0);
            if first > last {
                continue;
            }
            let row = y * width;
            mask.data[row + first as usize..=row + last as usize].fill(1);
        }
    }
    Ok(mask)
}
