use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `K(u) = 1.5 (1 - (2u)^2)` on `|u| ≤ 1/2`.
    EpanechnikovHalf,
}

/// A compactly supported, symmetric, nonnegative kernel integrating to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub support_radius: f64,
}

impl KernelSpec {
    pub const fn epanechnikov_half() -> Self {
        Self {
            kind: KernelKind::EpanechnikovHalf,
            support_radius: 0.5,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        kernel_eval(self, u)
    }

    /// `K(0)`, the largest value the kernel takes.
    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::epanechnikov_half()
    }
}

#[inline]
pub fn kernel_eval(spec: &KernelSpec, u: f64) -> f64 {
    match spec.kind {
        KernelKind::EpanechnikovHalf => {
            let r = spec.support_radius;
            if u.abs() > r {
                return 0.0;
            }
            // rescaled so that any radius still integrates to one
            let z = u / r;
            0.75 / r * (1.0 - z * z)
        }
    }
}

/// Coordinatewise product kernel `∏_m K(u_m)`.
#[inline]
pub fn product_kernel(spec: &KernelSpec, u: &[f64]) -> f64 {
    let mut k = 1.0;
    for &um in u {
        k *= kernel_eval(spec, um);
        if k == 0.0 {
            return 0.0;
        }
    }
    k
}

/// `factor · ŝ_X · n^exponent` with `ŝ_X` the sample standard deviation
/// (denominator `n - 1`).
pub fn rule_of_thumb_bandwidth(x_values: &[f64], factor: f64, exponent: f64) -> Result<f64> {
    if x_values.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth rule needs at least two observations, got {}",
            x_values.len()
        )));
    }
    if !(factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth factor must be positive, got {factor}"
        )));
    }
    let sd = x_values.std_dev();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateCovariate);
    }
    Ok(factor * sd * (x_values.len() as f64).powf(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        let k = KernelSpec::default();
        assert_eq!(k.eval(0.0), 1.5);
        assert_eq!(k.eval(0.5), 0.0);
        assert_eq!(k.eval(-0.5), 0.0);
        assert_abs_diff_eq!(k.eval(0.25), 1.125, epsilon = 1e-15);
        assert_eq!(k.eval(0.51), 0.0);
    }

    #[test]
    fn product_kernel_values() {
        let k = KernelSpec::default();
        assert_eq!(product_kernel(&k, &[0.0]), 1.5);
        assert_eq!(product_kernel(&k, &[0.0, 0.0]), 2.25);
        assert_eq!(product_kernel(&k, &[0.0, 0.6]), 0.0);
    }

    #[test]
    fn kernel_integrates_to_one() {
        let k = KernelSpec::default();
        let m = 100_000;
        let step = 1.0 / m as f64;
        let total: f64 = (0..m)
            .map(|i| k.eval(-0.5 + (i as f64 + 0.5) * step) * step)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn bandwidth_examples() {
        // 32 points with unit sample standard deviation
        let raw: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let sd = raw.iter().std_dev();
        let x: Vec<f64> = raw.iter().map(|v| v / sd).collect();
        assert_abs_diff_eq!(
            rule_of_thumb_bandwidth(&x, 2.0, -0.2).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            rule_of_thumb_bandwidth(&[0.0, 1.0], 1.0, 0.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(
            rule_of_thumb_bandwidth(&[3.0; 5], 2.0, -0.2),
            Err(Error::DegenerateCovariate)
        );
        assert!(rule_of_thumb_bandwidth(&[1.0], 2.0, -0.2).is_err());
        assert!(rule_of_thumb_bandwidth(&[1.0, 2.0], 0.0, -0.2).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_nonnegative(u in -2.0f64..2.0) {
            let k = KernelSpec::default();
            prop_assert_eq!(k.eval(u), k.eval(-u));
            prop_assert!(k.eval(u) >= 0.0);
            prop_assert!(k.eval(u) <= k.peak());
        }
    }
}
