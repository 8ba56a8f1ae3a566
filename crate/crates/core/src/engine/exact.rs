use serde::{Deserialize, Serialize};

use crate::engine::bootstrap::{bootstrap_pass, conclude};
use crate::engine::{FieldBuilder, TestSpec};
use crate::error::{Error, Result};
use crate::estimators::Sample;
use crate::numerics::empirical_quantile;

/// Largest sample size [`enumerate_bootstrap_exact`] accepts (`4^4 = 256`
/// resamples).
pub const MAX_EXACT_N: usize = 4;

/// The bootstrap distribution computed over all `n^n` equiprobable resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactBootstrap {
    pub a_star: f64,
    pub c_alpha: f64,
    pub c_hat_n: f64,
    /// Population standard deviation of `θ̂*`.
    pub theta_star_sd: f64,
    /// `θ̂*` for every resample, in lexicographic order of index tuples.
    pub theta_star: Vec<f64>,
}

/// Index tuple number `code` in base `n`, most significant digit first.
fn tuple(code: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    let mut c = code;
    for slot in out.iter_mut().rev() {
        *slot = c % n;
        c /= n;
    }
    out
}

/// Replaces the sampled bootstrap by full enumeration of every resample.
pub fn enumerate_bootstrap_exact(
    sample: &Sample,
    spec: &TestSpec,
    builder: &dyn FieldBuilder,
) -> Result<ExactBootstrap> {
    let n = sample.len();
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration needs 1 <= n <= {MAX_EXACT_N}, got {n}"
        )));
    }
    let total = n.pow(n as u32);
    let pass = bootstrap_pass(sample, spec, builder, total, |b| tuple(b, n))?;
    let result = conclude(&pass, spec, builder.grid(), spec.c_cs, 0)?;
    let draws = result.summary.theta_star;
    let mean = draws.iter().sum::<f64>() / total as f64;
    let var = draws.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / total as f64;
    Ok(ExactBootstrap {
        a_star: mean,
        c_alpha: empirical_quantile(&draws, 1.0 - spec.alpha)?,
        c_hat_n: result.contact.c_hat_n,
        theta_star_sd: var.sqrt(),
        theta_star: draws,
    })
}
