use super::Tensor;
use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// max over coordinates of |analytic − numeric| / max(1, |numeric|)
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares the analytic gradient of a scalar function against central
/// finite differences at every coordinate of `input`.
pub fn grad_check<F>(f: F, input: &Tensor, step: f64, tolerance: f64) -> Result<GradCheck>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let all: Vec<usize> = (0..input.numel()).collect();
    grad_check_at(f, input, step, tolerance, &all)
}

/// Like [`grad_check`] but only probes the listed coordinates.
pub fn grad_check_at<F>(
    f: F,
    input: &Tensor,
    step: f64,
    tolerance: f64,
    indices: &[usize],
) -> Result<GradCheck>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= input.numel()) {
        return Err(Error::InvalidArgument(format!(
            "coordinate {i} out of range for {} elements",
            input.numel()
        )));
    }
    let leaf = input.detach().requires_grad();
    let out = f(&leaf)?;
    out.backward()?;
    let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; input.numel()]);

    let eval = |i: usize, delta: f64| -> Result<f64> {
        let mut data = input.to_vec();
        data[i] += delta;
        f(&Tensor::new(input.shape(), data)?)?.item()
    };

    let mut report = GradCheck {
        max_rel_error: 0.0,
        tolerance,
        worst_index: 0,
    };
    for &i in indices {
        let numeric = (eval(i, step)? - eval(i, -step)?) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sum_is_exact() {
        let x = Tensor::randn(&[10], 5, 1.0).unwrap();
        let r = grad_check(|x| Ok(x.sum()), &x, 1e-6, 1e-9).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn sigmoid_self_test() {
        let x = Tensor::randn(&[3, 4], 9, 2.0).unwrap();
        let r = grad_check(|x| Ok(x.sigmoid().sum()), &x, 1e-6, 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // exp with a deliberately wrong derivative
        let x = Tensor::randn(&[4], 1, 1.0).unwrap();
        let r = grad_check(
            |x| Ok(x.unary("bad", f64::exp, |_, y, g| 2.0 * g * y).sum()),
            &x,
            1e-6,
            1e-4,
        )
        .unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn rejects_non_positive_step() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(|x| Ok(x.sum()), &x, 0.0, 1e-6).is_err());
    }
}
