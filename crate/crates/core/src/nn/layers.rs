use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{BackwardCtx, Tensor};

fn dims4(op: &'static str, x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(Error::InvalidArgument(format!(
            "{op} expects an N×C×H×W tensor, got {:?}",
            x.shape()
        ))),
    }
}

/// 2×2 max pooling with stride 2. Ties route the gradient to the first
/// element of the window in row-major order; NaN wins over numbers.
pub fn maxpool2(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = dims4("maxpool2", x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "maxpool2 needs even spatial extents, got {h}×{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..oh {
            for q in 0..ow {
                let top = base + 2 * y * w + 2 * q;
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if xd[cand] > xd[best] || xd[cand].is_nan() && !xd[best].is_nan() {
                        best = cand;
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    let len = x.numel();
    Ok(Tensor::from_op(
        "maxpool2",
        vec![n, c, oh, ow],
        out,
        vec![x.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let mut dx = vec![0.0; len];
            for (&src, &g) in argmax.iter().zip(ctx.grad) {
                dx[src] += g;
            }
            vec![Some(dx)]
        }),
    ))
}

/// Nearest-neighbour 2× upsampling; each value is replicated into a 2×2 block.
pub fn upsample2(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = dims4("upsample2", x)?;
    let (oh, ow) = (2 * h, 2 * w);
    let xd = x.data();
    let mut out = vec![0.0; n * c * oh * ow];
    for plane in 0..n * c {
        let src = &xd[plane * h * w..(plane + 1) * h * w];
        let dst = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
        for y in 0..oh {
            let row = &src[(y / 2) * w..(y / 2 + 1) * w];
            for (q, v) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *v = row[q / 2];
            }
        }
    }
    Ok(Tensor::from_op(
        "upsample2",
        vec![n, c, oh, ow],
        out,
        vec![x.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let mut dx = vec![0.0; n * c * h * w];
            for plane in 0..n * c {
                let g = &ctx.grad[plane * oh * ow..(plane + 1) * oh * ow];
                let d = &mut dx[plane * h * w..(plane + 1) * h * w];
                for y in 0..oh {
                    for q in 0..ow {
                        d[(y / 2) * w + q / 2] += g[y * ow + q];
                    }
                }
            }
            vec![Some(dx)]
        }),
    ))
}

/// Inverted dropout: in training mode each element is zeroed with probability
/// `p` and survivors are scaled by `1/(1-p)`. Identity otherwise.
pub fn dropout(x: &Tensor, p: f64, training: bool, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} not in [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.numel())
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok(Tensor::from_op(
        "dropout",
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            vec![Some(ctx.grad.iter().zip(&mask).map(|(g, m)| g * m).collect())]
        }),
    ))
}

/// Concatenates two N×C×H×W tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [n, ca, h, w] = dims4("concat_channels", a)?;
    let [nb, cb, hb, wb] = dims4("concat_channels", b)?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::shape("concat_channels", a.shape(), b.shape()));
    }
    let (la, lb) = (ca * h * w, cb * h * w);
    let mut out = Vec::with_capacity(n * (la + lb));
    for ni in 0..n {
        out.extend_from_slice(&a.data()[ni * la..(ni + 1) * la]);
        out.extend_from_slice(&b.data()[ni * lb..(ni + 1) * lb]);
    }
    Ok(Tensor::from_op(
        "concat_channels",
        vec![n, ca + cb, h, w],
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let mut ga = Vec::with_capacity(n * la);
            let mut gb = Vec::with_capacity(n * lb);
            for chunk in ctx.grad.chunks(la + lb) {
                ga.extend_from_slice(&chunk[..la]);
                gb.extend_from_slice(&chunk[la..]);
            }
            vec![Some(ga), Some(gb)]
        }),
    ))
}

/// Channels `[start, start + len)` of an N×C×H×W tensor.
pub fn narrow_channels(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let [n, c, h, w] = dims4("narrow_channels", x)?;
    if len == 0 || start + len > c {
        return Err(Error::InvalidArgument(format!(
            "channel range {start}..{} out of bounds for {c} channels",
            start + len
        )));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * len * hw);
    for ni in 0..n {
        out.extend_from_slice(&x.data()[(ni * c + start) * hw..(ni * c + start + len) * hw]);
    }
    Ok(Tensor::from_op(
        "narrow_channels",
        vec![n, len, h, w],
        out,
        vec![x.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let mut dx = vec![0.0; n * c * hw];
            for ni in 0..n {
                dx[(ni * c + start) * hw..(ni * c + start + len) * hw]
                    .copy_from_slice(&ctx.grad[ni * len * hw..(ni + 1) * len * hw]);
            }
            vec![Some(dx)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use proptest::prelude::*;

    fn img(h: usize, w: usize, v: &[f64]) -> Tensor {
        Tensor::new(&[1, 1, h, w], v.to_vec()).unwrap()
    }

    #[test]
    fn maxpool_values_and_gradient() {
        let x = img(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(maxpool2(&x).unwrap().data(), &[4.0]);
        let x = x.requires_grad();
        maxpool2(&x).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 0.0, 1.0]);

        let r = grad_check(|x| Ok(maxpool2(x)?.sum()), &x, 1e-6, 1e-6).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn maxpool_constant_and_ties() {
        let x = Tensor::full(&[1, 2, 4, 6], 3.0).unwrap().requires_grad();
        let y = maxpool2(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 3]);
        assert!(y.data().iter().all(|&v| v == 3.0));
        y.sum().backward().unwrap();
        // first element of each window takes the gradient
        let g = x.grad().unwrap();
        assert_eq!(&g[..6], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(&g[6..12], &[0.0; 6]);
    }

    #[test]
    fn maxpool_rejects_odd_extent() {
        assert!(maxpool2(&Tensor::zeros(&[1, 1, 3, 4]).unwrap()).is_err());
    }

    #[test]
    fn upsample_replicates() {
        let y = upsample2(&img(1, 1, &[1.0])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.0; 4]);
        let x = Tensor::randn(&[2, 3, 3, 5], 4, 1.0).unwrap();
        let r = grad_check(
            |x| {
                let u = upsample2(x)?;
                Ok(u.mul(&u)?.sum())
            },
            &x,
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    proptest! {
        #[test]
        fn maxpool_undoes_upsample(seed in 0u64..1000, h in 1usize..6, w in 1usize..6, c in 1usize..4) {
            let x = Tensor::randn(&[1, c, h, w], seed, 1.0).unwrap();
            let back = maxpool2(&upsample2(&x).unwrap()).unwrap();
            prop_assert_eq!(back.shape(), x.shape());
            prop_assert_eq!(back.data(), x.data());
        }
    }

    #[test]
    fn dropout_modes() {
        let x = Tensor::randn(&[100], 1, 1.0).unwrap();
        assert_eq!(dropout(&x, 0.5, false, 3).unwrap().data(), x.data());
        assert_eq!(dropout(&x, 0.0, true, 3).unwrap().data(), x.data());
        assert!(dropout(&x, 1.0, true, 3).is_err());
        let a = dropout(&x, 0.5, true, 3).unwrap();
        let b = dropout(&x, 0.5, true, 3).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let x = Tensor::ones(&[100_000]).unwrap();
        let y = dropout(&x, 0.5, true, 42).unwrap();
        let mean = y.data().iter().sum::<f64>() / 100_000.0;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn dropout_gradient_uses_same_mask() {
        let x = Tensor::randn(&[2, 2, 3, 3], 8, 1.0).unwrap();
        let r = grad_check(|x| Ok(dropout(x, 0.3, true, 9)?.mul(x)?.sum()), &x, 1e-6, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn concat_and_slice_back() {
        let a = Tensor::randn(&[2, 3, 4, 4], 1, 1.0).unwrap();
        let b = Tensor::randn(&[2, 5, 4, 4], 2, 1.0).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 8, 4, 4]);
        assert_eq!(narrow_channels(&c, 0, 3).unwrap().data(), a.data());
        assert_eq!(narrow_channels(&c, 3, 5).unwrap().data(), b.data());

        let mismatched = Tensor::zeros(&[2, 1, 4, 5]).unwrap();
        assert!(concat_channels(&a, &mismatched).is_err());

        let probe = Tensor::randn(&[2, 8, 4, 4], 3, 1.0).unwrap();
        let r = grad_check(|a| Ok(concat_channels(a, &b)?.mul(&probe)?.sum()), &a, 1e-6, 1e-6).unwrap();
        assert!(r.passed());
        let r = grad_check(|x| Ok(narrow_channels(x, 1, 2)?.exp().sum()), &a, 1e-6, 1e-6).unwrap();
        assert!(r.passed());
    }
}
