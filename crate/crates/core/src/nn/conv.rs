//! Pointwise, depthwise and depthwise-separable 2-D convolution.
//!
//! All kernels operate on N×C×H×W tensors. The depthwise kernel is a fixed
//! 3×3 window with zero padding equal to the dilation rate, so spatial extent
//! is preserved ("same" output size).

use crate::error::{Error, Result};
use crate::tensor::{BackwardCtx, Tensor};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Learnable weights of one separable convolution layer.
#[derive(Debug, Clone)]
pub struct ConvParams {
    /// C×1×3×3, one filter per input channel.
    pub depthwise: Tensor,
    /// C, added after the depthwise pass.
    pub depthwise_bias: Tensor,
    /// K×C×1×1
    pub pointwise: Tensor,
    /// K
    pub bias: Tensor,
}

impl ConvParams {
    pub fn new(
        depthwise: Tensor,
        depthwise_bias: Tensor,
        pointwise: Tensor,
        bias: Tensor,
    ) -> Result<Self> {
        let p = ConvParams {
            depthwise,
            depthwise_bias,
            pointwise,
            bias,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn in_channels(&self) -> usize {
        self.depthwise.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.pointwise.shape()[0]
    }

    fn validate(&self) -> Result<()> {
        let c = self.depthwise.shape().first().copied().unwrap_or(0);
        check_depthwise_kernel(&self.depthwise, c)?;
        let k = self.pointwise.shape().first().copied().unwrap_or(0);
        check_pointwise_kernel(&self.pointwise, c)?;
        check_bias(&self.depthwise_bias, c)?;
        check_bias(&self.bias, k)
    }

    /// Scalar parameters of a C→K separable layer: 9C depthwise weights,
    /// C depthwise biases, KC pointwise weights and K pointwise biases.
    pub const fn param_count(in_channels: usize, out_channels: usize) -> usize {
        TAPS * in_channels + in_channels + out_channels * in_channels + out_channels
    }
}

/// Scalar parameters of a C→K 1×1 convolution with bias.
pub const fn pointwise_param_count(in_channels: usize, out_channels: usize) -> usize {
    out_channels * in_channels + out_channels
}

fn dims4(op: &'static str, x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(Error::InvalidArgument(format!(
            "{op} expects an N×C×H×W tensor, got {:?}",
            x.shape()
        ))),
    }
}

fn check_pointwise_kernel(w: &Tensor, c: usize) -> Result<()> {
    match *w.shape() {
        [_, wc, 1, 1] if wc == c => Ok(()),
        _ => Err(Error::shape("pointwise kernel", w.shape(), &[0, c, 1, 1])),
    }
}

fn check_depthwise_kernel(w: &Tensor, c: usize) -> Result<()> {
    if w.shape() != [c, 1, KERNEL, KERNEL] {
        return Err(Error::shape("depthwise kernel", w.shape(), &[c, 1, KERNEL, KERNEL]));
    }
    Ok(())
}

fn check_bias(b: &Tensor, k: usize) -> Result<()> {
    if b.shape() != [k] {
        return Err(Error::shape("bias", b.shape(), &[k]));
    }
    Ok(())
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// `out[n,k,h,w] = bias[k] + Σ_c weight[k,c] · x[n,c,h,w]`
pub fn conv2d_pointwise(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = dims4("conv2d_pointwise", x)?;
    check_pointwise_kernel(weight, c)?;
    let k = weight.shape()[0];
    check_bias(bias, k)?;
    let hw = h * w;

    let (xd, wd, bd) = (x.data(), weight.data(), bias.data());
    let mut out = vec![0.0; n * k * hw];
    for ni in 0..n {
        let xs = &xd[ni * c * hw..(ni + 1) * c * hw];
        for ki in 0..k {
            let o = &mut out[(ni * k + ki) * hw..(ni * k + ki + 1) * hw];
            o.fill(bd[ki]);
            for ci in 0..c {
                axpy(wd[ki * c + ci], &xs[ci * hw..(ci + 1) * hw], o);
            }
        }
    }

    Ok(Tensor::from_op(
        "conv2d_pointwise",
        vec![n, k, h, w],
        out,
        vec![x.clone(), weight.clone(), bias.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let [px, pw, pb] = [&ctx.parents[0], &ctx.parents[1], &ctx.parents[2]];
            let (xd, wd, g) = (px.data(), pw.data(), ctx.grad);
            let dx = px.is_tracked().then(|| {
                let mut dx = vec![0.0; n * c * hw];
                for ni in 0..n {
                    for ki in 0..k {
                        let go = &g[(ni * k + ki) * hw..(ni * k + ki + 1) * hw];
                        for ci in 0..c {
                            let d = &mut dx[(ni * c + ci) * hw..(ni * c + ci + 1) * hw];
                            axpy(wd[ki * c + ci], go, d);
                        }
                    }
                }
                dx
            });
            let dw = pw.is_tracked().then(|| {
                let mut dw = vec![0.0; k * c];
                for ni in 0..n {
                    for ki in 0..k {
                        let go = &g[(ni * k + ki) * hw..(ni * k + ki + 1) * hw];
                        for ci in 0..c {
                            dw[ki * c + ci] += dot(go, &xd[(ni * c + ci) * hw..(ni * c + ci + 1) * hw]);
                        }
                    }
                }
                dw
            });
            let db = pb.is_tracked().then(|| channel_sums(g, n, k, hw));
            vec![dx, dw, db]
        }),
    ))
}

fn channel_sums(g: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let mut db = vec![0.0; c];
    for ni in 0..n {
        for (ci, b) in db.iter_mut().enumerate() {
            *b += g[(ni * c + ci) * hw..(ni * c + ci + 1) * hw].iter().sum::<f64>();
        }
    }
    db
}

/// Valid output range `[lo, hi)` along one axis for a tap offset.
fn tap_range(offset: isize, extent: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (extent as isize - offset).clamp(0, extent as isize) as usize;
    (lo.min(hi), hi)
}

/// Calls `f(dst, src, len)` for every row segment where the tap at offset
/// (dy, dx) reads inside the image: `dst` indexes the output plane, `src` the
/// input plane.
#[inline]
fn for_tap_rows(h: usize, w: usize, dy: isize, dx: isize, mut f: impl FnMut(usize, usize, usize)) {
    let (y0, y1) = tap_range(dy, h);
    let (x0, x1) = tap_range(dx, w);
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let src = ((y as isize + dy) as usize) * w + (x0 as isize + dx) as usize;
        f(y * w + x0, src, x1 - x0);
    }
}

/// Per-channel 3×3 convolution with zero padding equal to `dilation`.
pub fn conv2d_depthwise(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    dilation: usize,
) -> Result<Tensor> {
    let [n, c, h, w] = dims4("conv2d_depthwise", x)?;
    check_depthwise_kernel(weight, c)?;
    if let Some(b) = bias {
        check_bias(b, c)?;
    }
    if dilation == 0 {
        return Err(Error::InvalidArgument("dilation must be at least 1".into()));
    }
    let hw = h * w;
    let d = dilation as isize;
    let offset = move |tap: usize| ((tap / KERNEL) as isize - 1) * d;
    let offset_x = move |tap: usize| ((tap % KERNEL) as isize - 1) * d;

    let (xd, kd) = (x.data(), weight.data());
    let mut out = vec![0.0; n * c * hw];
    for ni in 0..n {
        for ci in 0..c {
            let plane = (ni * c + ci) * hw;
            let xs = &xd[plane..plane + hw];
            let o = &mut out[plane..plane + hw];
            if let Some(b) = bias {
                o.fill(b.data()[ci]);
            }
            for tap in 0..TAPS {
                let kv = kd[ci * TAPS + tap];
                for_tap_rows(h, w, offset(tap), offset_x(tap), |dst, src, len| {
                    axpy(kv, &xs[src..src + len], &mut o[dst..dst + len]);
                });
            }
        }
    }

    let mut parents = vec![x.clone(), weight.clone()];
    parents.extend(bias.cloned());
    Ok(Tensor::from_op(
        "conv2d_depthwise",
        vec![n, c, h, w],
        out,
        parents,
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let (px, pk) = (&ctx.parents[0], &ctx.parents[1]);
            let (xd, kd, g) = (px.data(), pk.data(), ctx.grad);
            let dx = px.is_tracked().then(|| {
                let mut dx = vec![0.0; n * c * hw];
                for ni in 0..n {
                    for ci in 0..c {
                        let plane = (ni * c + ci) * hw;
                        let go = &g[plane..plane + hw];
                        let dxs = &mut dx[plane..plane + hw];
                        for tap in 0..TAPS {
                            let kv = kd[ci * TAPS + tap];
                            for_tap_rows(h, w, offset(tap), offset_x(tap), |dst, src, len| {
                                axpy(kv, &go[dst..dst + len], &mut dxs[src..src + len]);
                            });
                        }
                    }
                }
                dx
            });
            let dk = pk.is_tracked().then(|| {
                let mut dk = vec![0.0; c * TAPS];
                for ni in 0..n {
                    for ci in 0..c {
                        let plane = (ni * c + ci) * hw;
                        let (go, xs) = (&g[plane..plane + hw], &xd[plane..plane + hw]);
                        for tap in 0..TAPS {
                            let mut acc = 0.0;
                            for_tap_rows(h, w, offset(tap), offset_x(tap), |dst, src, len| {
                                acc += dot(&go[dst..dst + len], &xs[src..src + len]);
                            });
                            dk[ci * TAPS + tap] += acc;
                        }
                    }
                }
                dk
            });
            let mut grads = vec![dx, dk];
            if let Some(pb) = ctx.parents.get(2) {
                grads.push(pb.is_tracked().then(|| channel_sums(g, n, c, hw)));
            }
            grads
        }),
    ))
}

/// Depthwise 3×3 pass followed by a 1×1 pointwise pass.
pub fn separable_conv(x: &Tensor, params: &ConvParams, dilation: usize) -> Result<Tensor> {
    let spatial = conv2d_depthwise(x, &params.depthwise, Some(&params.depthwise_bias), dilation)?;
    conv2d_pointwise(&spatial, &params.pointwise, &params.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;

    /// Nested-loop reference for the pointwise convolution.
    fn naive_pointwise(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
        let [n, c, h, wd] = dims4("ref", x).unwrap();
        let k = w.shape()[0];
        let mut out = vec![0.0; n * k * h * wd];
        for ni in 0..n {
            for ki in 0..k {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut s = b.data()[ki];
                        for ci in 0..c {
                            s += w.data()[ki * c + ci] * x.data()[((ni * c + ci) * h + y) * wd + xx];
                        }
                        out[((ni * k + ki) * h + y) * wd + xx] = s;
                    }
                }
            }
        }
        out
    }

    /// Nested-loop reference for the depthwise convolution with zero padding.
    fn naive_depthwise(x: &Tensor, k: &Tensor, b: &Tensor, d: usize) -> Vec<f64> {
        let [n, c, h, w] = dims4("ref", x).unwrap();
        let mut out = vec![0.0; n * c * h * w];
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        let mut s = b.data()[ci];
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = y as isize + (ky as isize - 1) * d as isize;
                                let sx = xx as isize + (kx as isize - 1) * d as isize;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                s += k.data()[ci * 9 + ky * 3 + kx]
                                    * x.data()[((ni * c + ci) * h + sy as usize) * w + sx as usize];
                            }
                        }
                        out[((ni * c + ci) * h + y) * w + xx] = s;
                    }
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn random_params(c: usize, k: usize, seed: u64) -> ConvParams {
        ConvParams::new(
            Tensor::randn(&[c, 1, 3, 3], seed, 1.0).unwrap(),
            Tensor::randn(&[c], seed + 1, 1.0).unwrap(),
            Tensor::randn(&[k, c, 1, 1], seed + 2, 1.0).unwrap(),
            Tensor::randn(&[k], seed + 3, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pointwise_identity_and_summation() {
        let x = Tensor::randn(&[2, 3, 4, 5], 1, 1.0).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = Tensor::new(&[3, 3, 1, 1], eye).unwrap();
        let y = conv2d_pointwise(&x, &w, &Tensor::zeros(&[3]).unwrap()).unwrap();
        assert_eq!(y.data(), x.data());

        let x = Tensor::randn(&[1, 2, 3, 3], 2, 1.0).unwrap();
        let w = Tensor::new(&[1, 2, 1, 1], vec![1.0, 1.0]).unwrap();
        let y = conv2d_pointwise(&x, &w, &Tensor::zeros(&[1]).unwrap()).unwrap();
        for i in 0..9 {
            assert_eq!(y.data()[i], x.data()[i] + x.data()[9 + i]);
        }
    }

    #[test]
    fn pointwise_channel_mismatch() {
        let x = Tensor::zeros(&[1, 3, 2, 2]).unwrap();
        let w = Tensor::zeros(&[4, 2, 1, 1]).unwrap();
        assert!(conv2d_pointwise(&x, &w, &Tensor::zeros(&[4]).unwrap()).is_err());
    }

    #[test]
    fn depthwise_delta_kernel_is_identity() {
        let x = Tensor::randn(&[2, 4, 5, 6], 3, 1.0).unwrap();
        let mut k = vec![0.0; 36];
        for c in 0..4 {
            k[c * 9 + 4] = 1.0;
        }
        let k = Tensor::new(&[4, 1, 3, 3], k).unwrap();
        let y = conv2d_depthwise(&x, &k, None, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn depthwise_ones_kernel_on_constant_image() {
        let c = 2.5;
        let x = Tensor::full(&[1, 1, 5, 5], c).unwrap();
        let k = Tensor::ones(&[1, 1, 3, 3]).unwrap();
        let y = conv2d_depthwise(&x, &k, None, 1).unwrap();
        let at = |r: usize, q: usize| y.data()[r * 5 + q];
        assert_eq!(at(2, 2), 9.0 * c);
        assert_eq!(at(0, 0), 4.0 * c);
        assert_eq!(at(4, 4), 4.0 * c);
        assert_eq!(at(0, 2), 6.0 * c);
    }

    #[test]
    fn kernels_match_naive_references() {
        for trial in 0..10u64 {
            let (n, c, k) = (1 + trial as usize % 2, 1 + trial as usize % 4, 1 + trial as usize % 5);
            let (h, w) = (3 + trial as usize, 2 + 2 * trial as usize);
            let x = Tensor::randn(&[n, c, h, w], 100 + trial, 1.0).unwrap();
            let p = random_params(c, k, 200 + trial * 4);
            for d in 1..=2 {
                let dw = conv2d_depthwise(&x, &p.depthwise, Some(&p.depthwise_bias), d).unwrap();
                let reference = naive_depthwise(&x, &p.depthwise, &p.depthwise_bias, d);
                assert!(max_abs_diff(dw.data(), &reference) < 1e-10);
            }
            let pw = conv2d_pointwise(&x, &Tensor::randn(&[k, c, 1, 1], 7, 1.0).unwrap(), &p.bias);
            let pw_ref = naive_pointwise(&x, &Tensor::randn(&[k, c, 1, 1], 7, 1.0).unwrap(), &p.bias);
            assert!(max_abs_diff(pw.unwrap().data(), &pw_ref) < 1e-10);
        }
    }

    #[test]
    fn separable_is_exact_composition() {
        let x = Tensor::randn(&[2, 3, 6, 6], 5, 1.0).unwrap();
        let p = random_params(3, 4, 10);
        let s = separable_conv(&x, &p, 1).unwrap();
        let d = conv2d_depthwise(&x, &p.depthwise, Some(&p.depthwise_bias), 1).unwrap();
        let composed = conv2d_pointwise(&d, &p.pointwise, &p.bias).unwrap();
        assert_eq!(s.data(), composed.data());
    }

    #[test]
    fn separable_param_count() {
        assert_eq!(ConvParams::param_count(64, 128), 8_960);
        let p = random_params(64, 128, 0);
        let counted = p.depthwise.numel() + p.depthwise_bias.numel() + p.pointwise.numel() + p.bias.numel();
        assert_eq!(counted, 8_960);
    }

    #[test]
    fn gradients_of_all_conv_inputs() {
        let x = Tensor::randn(&[2, 3, 5, 4], 21, 1.0).unwrap();
        let p = random_params(3, 2, 30);
        let probe = Tensor::randn(&[2, 2, 5, 4], 40, 1.0).unwrap();
        let loss = |y: Tensor| -> Result<Tensor> { Ok(y.mul(&probe)?.sum()) };
        let checks = [
            grad_check(|x| loss(separable_conv(x, &p, 1)?), &x, 1e-6, 1e-4),
            grad_check(|k| loss(separable_conv(&x, &ConvParams { depthwise: k.clone(), ..p.clone() }, 2)?), &p.depthwise, 1e-6, 1e-4),
            grad_check(|b| loss(separable_conv(&x, &ConvParams { depthwise_bias: b.clone(), ..p.clone() }, 1)?), &p.depthwise_bias, 1e-6, 1e-4),
            grad_check(|w| loss(separable_conv(&x, &ConvParams { pointwise: w.clone(), ..p.clone() }, 1)?), &p.pointwise, 1e-6, 1e-4),
            grad_check(|b| loss(separable_conv(&x, &ConvParams { bias: b.clone(), ..p.clone() }, 1)?), &p.bias, 1e-6, 1e-4),
        ];
        for (i, c) in checks.into_iter().enumerate() {
            let c = c.unwrap();
            assert!(c.passed(), "case {i}: {c:?}");
        }
    }
}
