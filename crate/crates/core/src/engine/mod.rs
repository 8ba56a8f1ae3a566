//! The test itself: `Λ_p` functionals, the statistic `θ̂`, sample contact
//! sets, the `ĉ_n` rule, contact-set and least-favourable bootstrap
//! statistics, and the `c*_{α,η}` decision.
//!
//! Problems plug in through [`FieldBuilder`], which turns a sample into
//! per-grid-point estimates `v̂_{τ,j}(x)` (and optionally `σ̂_{τ,j}(x)`)
//! together with their normalising rates.

mod bootstrap;
mod contact;
mod exact;
mod lambda;

use serde::{Deserialize, Serialize};

pub use bootstrap::{
    bootstrap_field_stack, bootstrap_indices, bootstrap_resample, compute_c_hat_n, compute_theta_hat,
    critical_value, field_stack, run_test, run_test_multi, sup_stat, theta_star_contact, theta_star_lfc,
    BootstrapSummary, CriticalValue, Diagnostics, TestResult,
};
pub use contact::{estimate_contact_sets, ContactMask, ContactSets};
pub use exact::{enumerate_bootstrap_exact, ExactBootstrap, MAX_EXACT_N};
pub use lambda::{lambda_a_p, lambda_a_p_mask, lambda_p, subset_mask, Form};

use crate::error::{Error, Result};
use crate::estimators::Sample;
use crate::numerics::{EvalGrid, StreamRng};

/// Default `η` in the `h^{d/2} η + â*` floor.
pub const DEFAULT_ETA: f64 = 1e-3;

/// Tuning of one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    /// `L_p` exponent, `p ≥ 1`.
    pub p: u32,
    pub form: Form,
    pub alpha: f64,
    pub eta: f64,
    /// `C_cs` in `ĉ_n = C_cs log log n · q_{1-0.1/log n}(S*_n)`.
    pub c_cs: f64,
    pub n_boot: usize,
    /// Use this contact-set threshold instead of the `ĉ_n` rule.
    #[serde(default)]
    pub c_hat_override: Option<f64>,
}

impl Default for TestSpec {
    fn default() -> Self {
        Self {
            p: 1,
            form: Form::Sum,
            alpha: 0.05,
            eta: DEFAULT_ETA,
            c_cs: 0.5,
            n_boot: 200,
            c_hat_override: None,
        }
    }
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.p < 1 {
            return bad(format!("p must be at least 1, got {}", self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.c_cs >= 0.0) || !self.c_cs.is_finite() {
            return bad(format!("c_cs must be nonnegative, got {}", self.c_cs));
        }
        if self.n_boot < 1 {
            return bad("n_boot must be at least 1".into());
        }
        if let Some(c) = self.c_hat_override {
            if !(c >= 0.0) {
                return bad(format!("contact threshold must be nonnegative, got {c}"));
            }
        }
        Ok(())
    }
}

/// Raw per-grid-point estimates for `J` inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// `v[j][g]`
    pub v: Vec<Vec<f64>>,
    /// `sigma[j][g]`; `None` means `σ̂ ≡ 1`.
    pub sigma: Option<Vec<Vec<f64>>>,
    pub usable: Vec<bool>,
    pub degenerate_fits: usize,
}

/// Normalisation attached to one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// `r_{n,j}` per inequality.
    pub rates: Vec<f64>,
    /// `h^{d/2}`, multiplying `η` in the critical value floor.
    pub eta_scale: f64,
    /// Sample size entering the `ĉ_n` rule.
    pub n_eff: f64,
}

/// Studentised estimates `û_{τ,j}(x) = r_{n,j} v̂ / σ̂` (or their bootstrap
/// counterparts `ŝ*`) with a usability mask. Values at unusable points are 0
/// and never enter a statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStack {
    pub u: Vec<Vec<f64>>,
    pub usable: Vec<bool>,
}

impl FieldStack {
    pub fn num_inequalities(&self) -> usize {
        self.u.len()
    }

    pub fn len(&self) -> usize {
        self.usable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.usable.is_empty()
    }

    pub fn usable_count(&self) -> usize {
        self.usable.iter().filter(|u| **u).count()
    }

    /// `(û_1, …, û_J)` at grid point `g`.
    pub fn point(&self, g: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.u.iter().map(|uj| uj[g]));
    }
}

/// Turns a sample into the estimates a test needs.
///
/// Implementations must be deterministic functions of their inputs; the
/// engine calls them concurrently from bootstrap workers.
pub trait FieldBuilder: Sync {
    fn grid(&self) -> &EvalGrid;

    fn num_inequalities(&self) -> usize;

    fn scaling(&self, sample: &Sample) -> Result<Scaling>;

    fn estimate(&self, sample: &Sample) -> Result<Estimate>;

    /// Estimate on the resample `sample.select(indices)`.
    fn estimate_resampled(&self, sample: &Sample, indices: &[usize]) -> Result<Estimate> {
        self.estimate(&sample.select(indices))
    }

    /// Row indices of one bootstrap resample; i.i.d. uniform by default.
    fn draw_resample(&self, sample: &Sample, rng: &mut StreamRng) -> Vec<usize> {
        bootstrap_indices(sample.len(), rng)
    }
}
