use super::{numel_of, BackwardCtx, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum Pairing {
    Same,
    LhsScalar,
    RhsScalar,
}

fn pairing(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(Pairing, Vec<usize>)> {
    if a.shape() == b.shape() {
        Ok((Pairing::Same, a.shape().to_vec()))
    } else if a.numel() == 1 {
        Ok((Pairing::LhsScalar, b.shape().to_vec()))
    } else if b.numel() == 1 {
        Ok((Pairing::RhsScalar, a.shape().to_vec()))
    } else {
        Err(Error::shape(op, a.shape(), b.shape()))
    }
}

/// Reduce a per-element gradient onto an operand that was scalar-broadcast.
fn fold(g: Vec<f64>, scalar: bool) -> Vec<f64> {
    if scalar {
        vec![g.iter().sum()]
    } else {
        g
    }
}

impl Tensor {
    fn binary<F, DA, DB>(
        &self,
        other: &Tensor,
        op: &'static str,
        f: F,
        da: DA,
        db: DB,
    ) -> Result<Tensor>
    where
        F: Fn(f64, f64) -> f64,
        DA: Fn(f64, f64, f64) -> f64 + 'static,
        DB: Fn(f64, f64, f64) -> f64 + 'static,
    {
        let (pair, shape) = pairing(op, self, other)?;
        let (a, b) = (self.data(), other.data());
        let n = numel_of(&shape);
        let ia = move |i: usize| if matches!(pair, Pairing::LhsScalar) { 0 } else { i };
        let ib = move |i: usize| if matches!(pair, Pairing::RhsScalar) { 0 } else { i };
        let data = (0..n).map(|i| f(a[ia(i)], b[ib(i)])).collect();
        Ok(Tensor::from_op(
            op,
            shape,
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let (pa, pb) = (&ctx.parents[0], &ctx.parents[1]);
                let (a, b) = (pa.data(), pb.data());
                let ga = pa.is_tracked().then(|| {
                    let g = (0..ctx.grad.len())
                        .map(|i| da(a[ia(i)], b[ib(i)], ctx.grad[i]))
                        .collect();
                    fold(g, matches!(pair, Pairing::LhsScalar))
                });
                let gb = pb.is_tracked().then(|| {
                    let g = (0..ctx.grad.len())
                        .map(|i| db(a[ia(i)], b[ib(i)], ctx.grad[i]))
                        .collect();
                    fold(g, matches!(pair, Pairing::RhsScalar))
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Elementwise op whose derivative is expressed through the input `x`, the
    /// output `y` and the upstream gradient `g`.
    pub(crate) fn unary<F, D>(&self, op: &'static str, f: F, d: D) -> Tensor
    where
        F: Fn(f64) -> f64,
        D: Fn(f64, f64, f64) -> f64 + 'static,
    {
        let data = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            op,
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let x = ctx.parents[0].data();
                let g = x
                    .iter()
                    .zip(ctx.output)
                    .zip(ctx.grad)
                    .map(|((&x, &y), &g)| d(x, y, g))
                    .collect();
                vec![Some(g)]
            }),
        )
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b, |_, _, g| g, |_, _, g| g)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b, |_, _, g| g, |_, _, g| -g)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b, |_, b, g| g * b, |a, _, g| g * a)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(
            other,
            "div",
            |a, b| a / b,
            |_, b, g| g / b,
            |a, b, g| -g * a / (b * b),
        )
    }

    pub fn neg(&self) -> Tensor {
        self.unary("neg", |x| -x, |_, _, g| -g)
    }

    pub fn scalar_mul(&self, c: f64) -> Tensor {
        self.unary("scalar_mul", |x| c * x, move |_, _, g| c * g)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary("add_scalar", |x| x + c, |_, _, g| g)
    }

    /// Natural logarithm. Every element must be strictly positive; clamp first.
    pub fn log(&self) -> Result<Tensor> {
        if let Some(&bad) = self.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::NonPositiveLog(bad));
        }
        Ok(self.unary("log", f64::ln, |x, _, g| g / x))
    }

    pub fn exp(&self) -> Tensor {
        self.unary("exp", f64::exp, |_, y, g| g * y)
    }

    /// Clamp into `[min, max]`; the gradient is zero outside the interval.
    pub fn clamp(&self, min: f64, max: f64) -> Result<Tensor> {
        if min > max {
            return Err(Error::InvalidArgument(format!("clamp bounds {min} > {max}")));
        }
        Ok(self.unary(
            "clamp",
            |x| x.clamp(min, max),
            move |x, _, g| if (min..=max).contains(&x) { g } else { 0.0 },
        ))
    }

    pub fn relu(&self) -> Tensor {
        self.unary(
            "relu",
            |x| if x < 0.0 { 0.0 } else { x },
            |x, _, g| if x > 0.0 { g } else { 0.0 },
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary("sigmoid", sigmoid, |_, y, g| g * y * (1.0 - y))
    }

    pub fn sum(&self) -> Tensor {
        let total = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(
            "sum",
            Vec::new(),
            vec![total],
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| vec![Some(vec![ctx.grad[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum().scalar_mul(1.0 / n)
    }

    /// Sums over the listed axes, dropping them from the result shape.
    pub fn sum_over(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        if let Some(&axis) = axes.iter().find(|&&a| a >= rank) {
            return Err(Error::InvalidAxis { axis, rank });
        }
        let keep: Vec<usize> = (0..rank).filter(|d| !axes.contains(d)).collect();
        let out_shape: Vec<usize> = keep.iter().map(|&d| self.shape()[d]).collect();
        let out_len = numel_of(&out_shape);

        // Flat output position of every input element.
        let mut out_strides = vec![0usize; rank];
        let mut stride = 1;
        for &d in keep.iter().rev() {
            out_strides[d] = stride;
            stride *= self.shape()[d];
        }
        let mut map: Vec<usize> = Vec::with_capacity(self.numel());
        let mut index = vec![0usize; rank];
        for _ in 0..self.numel() {
            map.push(index.iter().zip(&out_strides).map(|(i, s)| i * s).sum());
            for d in (0..rank).rev() {
                index[d] += 1;
                if index[d] < self.shape()[d] {
                    break;
                }
                index[d] = 0;
            }
        }

        let mut data = vec![0.0f64; out_len];
        for (&x, &o) in self.data().iter().zip(&map) {
            data[o] += x;
        }
        Ok(Tensor::from_op(
            "sum_over",
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                vec![Some(map.iter().map(|&o| ctx.grad[o]).collect())]
            }),
        ))
    }

    /// Same data under a new shape with identical element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != self.numel() {
            return Err(Error::shape("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.data().to_vec(),
            vec![self.clone()],
            Box::new(|ctx: &BackwardCtx<'_>| vec![Some(ctx.grad.to_vec())]),
        ))
    }

    /// `Σ_i weights[i] · tensors[i]` with constant weights.
    pub fn linear_combination(tensors: &[Tensor], weights: &[f64]) -> Result<Tensor> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::InvalidArgument("linear_combination of no tensors".into()))?;
        if tensors.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tensors but {} weights",
                tensors.len(),
                weights.len()
            )));
        }
        if let Some(t) = tensors.iter().find(|t| t.shape() != first.shape()) {
            return Err(Error::shape("linear_combination", first.shape(), t.shape()));
        }
        let mut data = vec![0.0; first.numel()];
        for (t, &w) in tensors.iter().zip(weights) {
            data.iter_mut().zip(t.data()).for_each(|(o, x)| *o += w * x);
        }
        let weights = weights.to_vec();
        Ok(Tensor::from_op(
            "linear_combination",
            first.shape().to_vec(),
            data,
            tensors.to_vec(),
            Box::new(move |ctx: &BackwardCtx<'_>| {
                ctx.parents
                    .iter()
                    .zip(&weights)
                    .map(|(p, &w)| {
                        p.is_tracked()
                            .then(|| ctx.grad.iter().map(|g| w * g).collect())
                    })
                    .collect()
            }),
        ))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_and_relu_values() {
        assert_eq!(Tensor::scalar(0.0).sigmoid().item().unwrap(), 0.5);
        let x = Tensor::scalar(-1.5).requires_grad();
        let y = x.relu();
        assert_eq!(y.item().unwrap(), 0.0);
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0]);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let r = grad_check(|x| Ok(x.sigmoid().sum()), &Tensor::scalar(0.0), 1e-6, 1e-6).unwrap();
        assert!(r.passed());
        let x = Tensor::scalar(0.0).requires_grad();
        x.sigmoid().backward().unwrap();
        let numeric = (super::sigmoid(1e-6) - super::sigmoid(-1e-6)) / 2e-6;
        assert!((x.grad().unwrap()[0] - 0.25).abs() < 1e-12);
        assert!((numeric - 0.25).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_and_scalar_broadcast() {
        let a = t(&[2], &[1.0, 2.0]);
        let b = t(&[3], &[1.0, 2.0, 3.0]);
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch { .. })));
        let s = Tensor::scalar(10.0).requires_grad();
        let y = s.mul(&b).unwrap();
        assert_eq!(y.data(), &[10.0, 20.0, 30.0]);
        y.sum().backward().unwrap();
        assert_eq!(s.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn log_rejects_non_positive() {
        assert!(matches!(t(&[2], &[1.0, 0.0]).log(), Err(Error::NonPositiveLog(_))));
        assert!(t(&[2], &[1.0, 0.0]).clamp(1e-7, 1.0).unwrap().log().is_ok());
    }

    #[test]
    fn reductions() {
        let x = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(x.sum().item().unwrap(), 10.0);
        assert_eq!(Tensor::full(&[3, 5], 2.5).unwrap().mean().item().unwrap(), 2.5);
        assert_eq!(x.sum_over(&[0]).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(x.sum_over(&[1]).unwrap().data(), &[3.0, 7.0]);
        assert_eq!(x.sum_over(&[0, 1]).unwrap().data(), &[10.0]);
        assert!(matches!(x.sum_over(&[2]), Err(Error::InvalidAxis { axis: 2, rank: 2 })));
    }

    #[test]
    fn gradient_of_sum_of_squares() {
        let x = t(&[3], &[1.0, 2.0, 3.0]).requires_grad();
        x.mul(&x).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 4.0, 6.0]);
        let r = grad_check(|x| Ok(x.mul(x)?.sum()), &x, 1e-6, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn every_elementwise_op_passes_grad_check() {
        let x = Tensor::randn(&[2, 3, 4, 4], 11, 1.0).unwrap();
        let pos = x.unary("abs1", |v| v.abs() + 0.5, |_, _, g| g).detach();
        let other = Tensor::randn(&[2, 3, 4, 4], 12, 1.0).unwrap();
        let other_pos = pos.scalar_mul(2.0).detach();
        type F<'a> = Box<dyn Fn(&Tensor) -> Result<Tensor> + 'a>;
        let cases: Vec<(&str, &Tensor, F<'_>)> = vec![
            ("add", &x, Box::new(|x: &Tensor| Ok(x.add(&other)?.mul(x)?.sum()))),
            ("sub", &x, Box::new(|x: &Tensor| Ok(other.sub(x)?.mul(x)?.sum()))),
            ("div", &x, Box::new(|x: &Tensor| Ok(x.div(&other_pos)?.mul(x)?.sum()))),
            ("div_rhs", &pos, Box::new(|x: &Tensor| Ok(other.div(x)?.sum()))),
            ("log", &pos, Box::new(|x: &Tensor| Ok(x.log()?.sum()))),
            ("exp", &x, Box::new(|x: &Tensor| Ok(x.exp().sum()))),
            ("sigmoid", &x, Box::new(|x: &Tensor| Ok(x.sigmoid().mul(x)?.sum()))),
            ("scalar_mul", &x, Box::new(|x: &Tensor| Ok(x.scalar_mul(-3.0).mul(x)?.sum()))),
            ("mean", &x, Box::new(|x: &Tensor| Ok(x.mul(x)?.mean()))),
            ("sum_over", &x, Box::new(|x: &Tensor| {
                let s = x.sum_over(&[0, 2])?;
                Ok(s.mul(&s)?.sum())
            })),
        ];
        for (name, input, f) in cases {
            let r = grad_check(|t| f(t), input, 1e-6, 1e-4).unwrap();
            assert!(r.passed(), "{name}: {r:?}");
        }
    }

    #[test]
    fn relu_grad_away_from_kink() {
        let x = Tensor::randn(&[64], 3, 1.0).unwrap();
        let shifted: Vec<f64> = x
            .data()
            .iter()
            .map(|&v| if v.abs() < 1e-3 { v + 0.01 } else { v })
            .collect();
        let x = Tensor::new(&[64], shifted).unwrap();
        let r = grad_check(|x| Ok(x.relu().sum()), &x, 1e-6, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn relu_propagates_nan() {
        let y = t(&[3], &[-1.0, f64::NAN, 2.0]).relu();
        assert_eq!(y.data()[0], 0.0);
        assert!(y.data()[1].is_nan());
    }

    #[test]
    fn clamp_blocks_gradient_outside() {
        let x = t(&[3], &[-1.0, 0.5, 2.0]).requires_grad();
        x.clamp(0.0, 1.0).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn ops_do_not_mutate_inputs() {
        let x = Tensor::randn(&[5], 2, 1.0).unwrap().requires_grad();
        let before = x.to_vec();
        let y = x.sigmoid().mul(&x).unwrap().exp().sum();
        y.backward().unwrap();
        assert_eq!(x.to_vec(), before);
    }

    #[test]
    fn linear_combination_gradient_is_weight() {
        let a = Tensor::randn(&[4], 1, 1.0).unwrap().requires_grad();
        let b = Tensor::randn(&[4], 2, 1.0).unwrap().requires_grad();
        let y = Tensor::linear_combination(&[a.clone(), b.clone()], &[0.25, -2.0]).unwrap();
        y.sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![0.25; 4]);
        assert_eq!(b.grad().unwrap(), vec![-2.0; 4]);
    }
}
