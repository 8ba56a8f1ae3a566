//! Numerical building blocks shared by the estimators, the test engine and
//! the simulation harness.

mod grid;
mod kernel;
mod rng;

pub use grid::{riemann_integrate, Axis, EvalGrid};
pub use kernel::{kernel_eval, product_kernel, rule_of_thumb_bandwidth, KernelKind, KernelSpec};
pub use rng::{derive_seed, RandomSource, StreamRng};

use crate::error::{Error, Result};

/// Left-continuous order statistic quantile.
///
/// Returns the smallest `v` among `values` with `#{values ≤ v} / B ≥ level`,
/// i.e. the `⌈level·B⌉`-th order statistic (1-based).
pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty set".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in (0, 1], got {level}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_statistic_rank(sorted.len(), level) - 1])
}

/// 1-based rank `⌈level·B⌉`, with products that land within rounding noise
/// of an integer treated as that integer (`0.95 · 200` is rank 190).
pub(crate) fn order_statistic_rank(b: usize, level: f64) -> usize {
    let raw = level * b as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= 1e-9 * (b as f64).max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, b)
}
