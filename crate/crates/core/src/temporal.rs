//! Approximate rank pooling (ARP).
//!
//! A window of T frames (or feature maps) is collapsed into a single
//! "dynamic" map `Σ_t α_t · frame_t` with fixed coefficients. The default
//! coefficients are
//!
//! ```text
//! α_t = 2(T − t + 1) − (T + 1)(H_T − H_{t−1}),   H_t = Σ_{i=1..t} 1/i,  t = 1..T
//! ```
//!
//! They sum to zero, so a static window pools to an all-zero map, and they
//! weight later frames positively, so the sign of the result encodes the
//! direction of change over the window.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which coefficient formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArpVariant {
    /// Harmonic-number coefficients (the standard approximation).
    #[default]
    Harmonic,
    /// `α_t = 2t − T − 1`
    Linear,
}

/// Per-frame temporal weights for a window of `len()` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ArpCoefficients {
    alpha: Vec<f64>,
}

impl ArpCoefficients {
    pub fn new(window: usize, variant: ArpVariant) -> Result<Self> {
        if window < 1 {
            return Err(Error::InvalidArgument("ARP window must be at least 1".into()));
        }
        let t_len = window as f64;
        let alpha = match variant {
            ArpVariant::Harmonic => {
                // H_T − H_{t−1} as a tail sum accumulated from the small end
                let mut tails = vec![0.0; window];
                let mut acc = 0.0;
                for t in (1..=window).rev() {
                    acc += 1.0 / t as f64;
                    tails[t - 1] = acc;
                }
                let mut alpha: Vec<f64> = tails
                    .iter()
                    .enumerate()
                    .map(|(i, tail)| 2.0 * (t_len - i as f64) - (t_len + 1.0) * tail)
                    .collect();
                // The last coefficient is the smallest in magnitude; it absorbs
                // the rounding residual so the stored values sum to zero.
                if window > 1 {
                    alpha[window - 1] = -compensated_sum(&alpha[..window - 1]);
                }
                alpha
            }
            ArpVariant::Linear => (1..=window).map(|t| 2.0 * t as f64 - t_len - 1.0).collect(),
        };
        Ok(ArpCoefficients { alpha })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

/// Neumaier-compensated summation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0;
    for &v in values {
        let t = sum + v;
        compensation += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + compensation
}

/// Harmonic ARP coefficients for a window of `window` frames.
pub fn arp_coefficients(window: usize) -> Result<ArpCoefficients> {
    ArpCoefficients::new(window, ArpVariant::Harmonic)
}

/// `Σ_t α_t · frames[t]`. Differentiable; the gradient with respect to
/// `frames[t]` is `α_t` everywhere.
pub fn arp_pool(frames: &[Tensor], coeffs: &ArpCoefficients) -> Result<Tensor> {
    if frames.len() != coeffs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frames for an ARP window of {}",
            frames.len(),
            coeffs.len()
        )));
    }
    Tensor::linear_combination(frames, coeffs.alpha())
}

/// Result of the least-squares ranking fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDirection {
    pub direction: Vec<f64>,
    /// Set when every frame is identical and no ordering can be fitted.
    pub degenerate: bool,
}

/// Least-squares linear ranking function over time-averaged frames.
///
/// With `V_t = (1/t) Σ_{i≤t} frame_i`, returns the minimum-norm `u` such that
/// `⟨u, V_t⟩ ≈ t` in the least-squares sense. Intended as an independent
/// reference for the direction that rank pooling approximates.
pub fn rank_pool_direction_oracle(frames: &[Vec<f64>]) -> Result<RankDirection> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument("ranking oracle needs at least 2 frames".into()));
    }
    let dim = frames[0].len();
    if dim == 0 || frames.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidArgument("frames must be non-empty and equally sized".into()));
    }
    if frames.iter().all(|f| f == &frames[0]) {
        return Ok(RankDirection {
            direction: vec![0.0; dim],
            degenerate: true,
        });
    }

    let t_len = frames.len();
    let mut running = vec![0.0; dim];
    let mut averaged = DMatrix::<f64>::zeros(t_len, dim);
    for (t, f) in frames.iter().enumerate() {
        running.iter_mut().zip(f).for_each(|(r, x)| *r += x);
        for (j, r) in running.iter().enumerate() {
            averaged[(t, j)] = r / (t + 1) as f64;
        }
    }
    let targets = DVector::from_iterator(t_len, (1..=t_len).map(|t| t as f64));
    // u = Vᵀ (V Vᵀ)⁺ t is the minimum-norm least-squares solution.
    let gram = &averaged * averaged.transpose();
    let pinv = gram
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidArgument(format!("ranking oracle: {e}")))?;
    let u = averaged.transpose() * (pinv * targets);
    Ok(RankDirection {
        direction: u.iter().copied().collect(),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use proptest::prelude::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn small_windows_match_hand_values() {
        assert_close(arp_coefficients(1).unwrap().alpha(), &[0.0], 1e-12);
        assert_close(arp_coefficients(2).unwrap().alpha(), &[-0.5, 0.5], 1e-12);
        assert_close(
            arp_coefficients(3).unwrap().alpha(),
            &[-4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
            1e-12,
        );
        assert!(arp_coefficients(0).is_err());
    }

    #[test]
    fn residual_absorption_stays_close_to_formula() {
        // direct evaluation of the closed form for the last coefficient
        for t_len in [5usize, 64, 1024] {
            let a = arp_coefficients(t_len).unwrap();
            let expected = 2.0 - (t_len as f64 + 1.0) / t_len as f64;
            assert!((a.alpha()[t_len - 1] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_variant() {
        let a = ArpCoefficients::new(4, ArpVariant::Linear).unwrap();
        assert_eq!(a.alpha(), &[-3.0, -1.0, 1.0, 3.0]);
    }

    #[test]
    fn coefficients_sum_to_zero() {
        for t in 1..=1024 {
            for variant in [ArpVariant::Harmonic, ArpVariant::Linear] {
                let s = compensated_sum(ArpCoefficients::new(t, variant).unwrap().alpha());
                assert!(s.abs() < 1e-12, "T={t} {variant:?}: {s}");
            }
        }
    }

    #[test]
    fn tail_sums_are_positive() {
        // Σ_{t≥s} α_t > 0 for s ≥ 2 is what makes elementwise-increasing
        // windows pool to strictly positive maps.
        for t_len in 2..=32 {
            let a = arp_coefficients(t_len).unwrap();
            for s in 1..t_len {
                let tail: f64 = a.alpha()[s..].iter().sum();
                assert!(tail > 0.0, "T={t_len} s={s}");
            }
            let weighted: f64 = a.alpha().iter().enumerate().map(|(i, a)| a * (i + 1) as f64).sum();
            assert!(weighted > 0.0);
        }
    }

    #[test]
    fn pool_examples() {
        let c = arp_coefficients(3).unwrap();
        let constant: Vec<Tensor> = (0..3).map(|_| Tensor::full(&[2, 3, 3], 1.7).unwrap()).collect();
        let z = arp_pool(&constant, &c).unwrap();
        assert!(z.data().iter().all(|v| v.abs() < 1e-12));

        let ramp: Vec<Tensor> = (1..=3).map(|t| Tensor::full(&[2, 3, 3], t as f64).unwrap()).collect();
        let r = arp_pool(&ramp, &c).unwrap();
        assert!(r.data().iter().all(|v| (v - 2.0).abs() < 1e-12));

        assert!(arp_pool(&ramp[..2], &c).is_err());
        let mismatched = vec![ramp[0].clone(), ramp[1].clone(), Tensor::ones(&[2, 3, 4]).unwrap()];
        assert!(arp_pool(&mismatched, &c).is_err());
    }

    #[test]
    fn time_reversal_negates_pair() {
        let c = arp_coefficients(2).unwrap();
        let a = Tensor::randn(&[5], 1, 1.0).unwrap();
        let b = Tensor::randn(&[5], 2, 1.0).unwrap();
        let fwd = arp_pool(&[a.clone(), b.clone()], &c).unwrap();
        let rev = arp_pool(&[b, a], &c).unwrap();
        for (x, y) in fwd.data().iter().zip(rev.data()) {
            assert!((x + y).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_is_alpha() {
        let c = arp_coefficients(4).unwrap();
        let frames: Vec<Tensor> = (0..4)
            .map(|i| Tensor::randn(&[2, 3], i, 1.0).unwrap().requires_grad())
            .collect();
        arp_pool(&frames, &c).unwrap().sum().backward().unwrap();
        for (f, a) in frames.iter().zip(c.alpha()) {
            assert!(f.grad().unwrap().iter().all(|g| g == a));
        }
        let others: Vec<Tensor> = (10..13).map(|i| Tensor::randn(&[2, 3], i, 1.0).unwrap()).collect();
        let probe = Tensor::randn(&[2, 3], 99, 1.0).unwrap();
        let r = grad_check(
            |x| {
                let mut all = vec![x.clone()];
                all.extend(others.iter().cloned());
                Ok(arp_pool(&all, &c)?.mul(&probe)?.sum())
            },
            &Tensor::randn(&[2, 3], 5, 1.0).unwrap(),
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(r.passed());
    }

    proptest! {
        #[test]
        fn offset_invariance_and_linearity(seed in 0u64..500, t_len in 1usize..9, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let c = arp_coefficients(t_len).unwrap();
            let f: Vec<Tensor> = (0..t_len).map(|i| Tensor::randn(&[3, 4], seed * 31 + i as u64, 1.0).unwrap()).collect();
            let g: Vec<Tensor> = (0..t_len).map(|i| Tensor::randn(&[3, 4], seed * 37 + 1000 + i as u64, 1.0).unwrap()).collect();
            let offset = Tensor::randn(&[3, 4], seed + 7, 5.0).unwrap();
            let shifted: Vec<Tensor> = f.iter().map(|x| x.add(&offset).unwrap()).collect();
            let base = arp_pool(&f, &c).unwrap();
            let moved = arp_pool(&shifted, &c).unwrap();
            for (x, y) in base.data().iter().zip(moved.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let mixed: Vec<Tensor> = f.iter().zip(&g).map(|(x, y)| x.scalar_mul(a).add(&y.scalar_mul(b)).unwrap()).collect();
            let lhs = arp_pool(&mixed, &c).unwrap();
            let rhs = base.scalar_mul(a).add(&arp_pool(&g, &c).unwrap().scalar_mul(b)).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let frames: Vec<Vec<f64>> = (1..=5).map(|t| vec![t as f64, 0.0, 0.0]).collect();
        let u = rank_pool_direction_oracle(&frames).unwrap();
        assert!(!u.degenerate);
        assert!(u.direction[0] > 0.0);

        let constant = vec![vec![0.5, 1.0]; 4];
        let u = rank_pool_direction_oracle(&constant).unwrap();
        assert!(u.degenerate);
        assert_eq!(u.direction, vec![0.0, 0.0]);

        assert!(rank_pool_direction_oracle(&frames[..1]).is_err());
    }
}
