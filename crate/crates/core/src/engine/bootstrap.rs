use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::contact::{estimate_contact_sets, ContactSets};
use crate::engine::lambda::{lambda_a_p_mask, lambda_p};
use crate::engine::{Estimate, FieldBuilder, FieldStack, Scaling, TestSpec};
use crate::error::{Error, Result};
use crate::estimators::Sample;
use crate::numerics::{empirical_quantile, riemann_integrate, EvalGrid, RandomSource, StreamRng};

/// Draws of the bootstrap statistics and the critical values built on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Contact-set statistic `θ̂*` per draw.
    pub theta_star: Vec<f64>,
    /// Least-favourable statistic `θ̂*_LFC` per draw.
    pub theta_star_lfc: Vec<f64>,
    /// `S*_n` per draw.
    pub sup_stats: Vec<f64>,
    pub a_star: f64,
    pub c_alpha_star: f64,
    pub c_alpha_eta_star: f64,
    pub a_star_lfc: f64,
    pub c_alpha_lfc: f64,
    pub c_alpha_eta_lfc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub n_eff: f64,
    pub rates: Vec<f64>,
    pub eta_scale: f64,
    pub grid_points: usize,
    pub usable_points: usize,
    pub unusable_points: usize,
    /// Local quantile fits with a non-unique or degenerate optimum.
    pub degenerate_fits: usize,
    pub contact_points: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub theta_hat: f64,
    pub c_cs: f64,
    pub summary: BootstrapSummary,
    pub contact: ContactSets,
    /// `θ̂ > c*_{α,η}`.
    pub reject: bool,
    /// Decision with least-favourable critical values, for comparison.
    pub reject_lfc: bool,
    pub p_value: f64,
    /// Studentised estimates `û` on the grid.
    pub fields: FieldStack,
    pub diagnostics: Diagnostics,
}

/// `(c*_α, â*, c*_{α,η})` from a set of bootstrap draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub c_alpha: f64,
    pub a_star: f64,
    pub c_alpha_eta: f64,
}

/// `û_j = r_{n,j} v̂_j / σ̂_j` on usable points.
pub fn field_stack(est: &Estimate, scaling: &Scaling) -> Result<FieldStack> {
    let j = est.v.len();
    if scaling.rates.len() != j {
        return Err(Error::ShapeMismatch {
            expected: j,
            actual: scaling.rates.len(),
        });
    }
    let g = est.usable.len();
    let mut usable = est.usable.clone();
    if let Some(sigma) = &est.sigma {
        for s in sigma {
            for (k, sk) in s.iter().enumerate() {
                if !(*sk > 0.0) {
                    usable[k] = false;
                }
            }
        }
    }
    let u = (0..j)
        .map(|jj| {
            (0..g)
                .map(|k| {
                    if !usable[k] {
                        return 0.0;
                    }
                    let sigma = est.sigma.as_ref().map_or(1.0, |s| s[jj][k]);
                    scaling.rates[jj] * est.v[jj][k] / sigma
                })
                .collect()
        })
        .collect();
    Ok(FieldStack { u, usable })
}

fn integrate_lambda(fields: &FieldStack, grid: &EvalGrid, spec: &TestSpec) -> Result<f64> {
    let mut buf = Vec::with_capacity(fields.num_inequalities());
    let integrand: Vec<f64> = (0..fields.len())
        .map(|g| {
            if !fields.usable[g] {
                return 0.0;
            }
            fields.point(g, &mut buf);
            lambda_p(&buf, spec.p, spec.form)
        })
        .collect();
    riemann_integrate(&integrand, grid, Some(&fields.usable))
}

/// `θ̂ = ∫ Λ_p(û_1, …, û_J) dQ` over the usable region.
pub fn compute_theta_hat(fields: &FieldStack, grid: &EvalGrid, spec: &TestSpec) -> Result<f64> {
    if fields.usable_count() == 0 {
        return Err(Error::EmptyUsableRegion("statistic has no usable grid point".into()));
    }
    integrate_lambda(fields, grid, spec)
}

/// `n` i.i.d. uniform row indices.
pub fn bootstrap_indices(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Nonparametric bootstrap resample of the rows of `sample`.
pub fn bootstrap_resample(sample: &Sample, source: &RandomSource) -> Sample {
    sample.select(&bootstrap_indices(sample.len(), &mut source.rng()))
}

/// `ŝ*_j = r_{n,j} (v̂*_j - v̂_j) / σ̂*_j` on points usable in both the
/// original and the resample.
pub fn bootstrap_field_stack(original: &Estimate, resampled: &Estimate, scaling: &Scaling) -> Result<FieldStack> {
    let j = original.v.len();
    if resampled.v.len() != j || scaling.rates.len() != j {
        return Err(Error::ShapeMismatch {
            expected: j,
            actual: resampled.v.len(),
        });
    }
    let g = original.usable.len();
    if resampled.usable.len() != g {
        return Err(Error::ShapeMismatch {
            expected: g,
            actual: resampled.usable.len(),
        });
    }
    let mut usable: Vec<bool> = original
        .usable
        .iter()
        .zip(&resampled.usable)
        .map(|(a, b)| *a && *b)
        .collect();
    if let Some(sigma) = &resampled.sigma {
        for s in sigma {
            for (k, sk) in s.iter().enumerate() {
                if !(*sk > 0.0) {
                    usable[k] = false;
                }
            }
        }
    }
    if !usable.iter().any(|u| *u) {
        return Err(Error::EmptyUsableRegion("bootstrap resample has no usable grid point".into()));
    }
    let s = (0..j)
        .map(|jj| {
            (0..g)
                .map(|k| {
                    if !usable[k] {
                        return 0.0;
                    }
                    let sigma = resampled.sigma.as_ref().map_or(1.0, |s| s[jj][k]);
                    scaling.rates[jj] * (resampled.v[jj][k] - original.v[jj][k]) / sigma
                })
                .collect()
        })
        .collect();
    Ok(FieldStack { u: s, usable })
}

/// `S*_n = max{ sup_{j,τ,x} ŝ*_{τ,j}(x), √(log n) }` over usable points.
pub fn sup_stat(s_star: &FieldStack, n: f64) -> f64 {
    let floor = n.max(1.0).ln().sqrt();
    let mut sup = f64::NEG_INFINITY;
    for uj in &s_star.u {
        for (v, usable) in uj.iter().zip(&s_star.usable) {
            if *usable && *v > sup {
                sup = *v;
            }
        }
    }
    sup.max(floor)
}

/// `ĉ_n = C_cs · log log n · q_{1 - 0.1/log n}(S*_n)`.
pub fn compute_c_hat_n(sup_stats: &[f64], n: f64, c_cs: f64) -> Result<f64> {
    if !(n > std::f64::consts::E) {
        return Err(Error::InvalidParameter(format!(
            "the contact threshold rule needs n > e, got {n}"
        )));
    }
    let log_n = n.ln();
    let q = empirical_quantile(sup_stats, 1.0 - 0.1 / log_n)?;
    Ok(c_cs * log_n.ln() * q)
}

/// `θ̂* = Σ_A ∫_{B̂_A} Λ_{A,p}(ŝ*) dQ`.
pub fn theta_star_contact(
    s_star: &FieldStack,
    contact: &ContactSets,
    grid: &EvalGrid,
    spec: &TestSpec,
) -> Result<f64> {
    if contact.membership.len() != s_star.len() {
        return Err(Error::ShapeMismatch {
            expected: s_star.len(),
            actual: contact.membership.len(),
        });
    }
    let mut buf = Vec::with_capacity(s_star.num_inequalities());
    let integrand: Vec<f64> = (0..s_star.len())
        .map(|g| {
            let set = contact.membership[g];
            if set == 0 || !s_star.usable[g] {
                return 0.0;
            }
            s_star.point(g, &mut buf);
            lambda_a_p_mask(&buf, set, spec.p, spec.form)
        })
        .collect();
    riemann_integrate(&integrand, grid, Some(&s_star.usable))
}

/// `θ̂*_LFC = ∫ Λ_p(ŝ*) dQ` over the whole usable region.
pub fn theta_star_lfc(s_star: &FieldStack, grid: &EvalGrid, spec: &TestSpec) -> Result<f64> {
    integrate_lambda(s_star, grid, spec)
}

/// `c*_α` = `(1-α)` quantile of the draws, `â*` = their mean and
/// `c*_{α,η} = max{c*_α, h^{d/2} η + â*}` with `eta_scale = h^{d/2}`.
pub fn critical_value(draws: &[f64], alpha: f64, eta: f64, eta_scale: f64) -> Result<CriticalValue> {
    let c_alpha = empirical_quantile(draws, 1.0 - alpha)?;
    let a_star = draws.iter().sum::<f64>() / draws.len() as f64;
    Ok(CriticalValue {
        c_alpha,
        a_star,
        c_alpha_eta: c_alpha.max(eta_scale * eta + a_star),
    })
}

/// Original-sample quantities plus the `ŝ*` field of every bootstrap draw.
pub(crate) struct BootstrapPass {
    pub scaling: Scaling,
    pub estimate: Estimate,
    pub fields: FieldStack,
    pub theta_hat: f64,
    pub draws: Vec<FieldStack>,
    pub sup_stats: Vec<f64>,
    pub n: usize,
}

pub(crate) fn bootstrap_pass<F>(
    sample: &Sample,
    spec: &TestSpec,
    builder: &dyn FieldBuilder,
    n_draws: usize,
    indices_for: F,
) -> Result<BootstrapPass>
where
    F: Fn(usize) -> Vec<usize> + Sync,
{
    spec.validate()?;
    let grid = builder.grid();
    let scaling = builder.scaling(sample)?;
    let estimate = builder.estimate(sample)?;
    let fields = field_stack(&estimate, &scaling)?;
    let theta_hat = compute_theta_hat(&fields, grid, spec)?;
    // each draw is keyed by its index, so the result is schedule independent
    let draws = (0..n_draws)
        .into_par_iter()
        .map(|b| {
            let idx = indices_for(b);
            let star = builder.estimate_resampled(sample, &idx)?;
            bootstrap_field_stack(&estimate, &star, &scaling)
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_stats = draws.iter().map(|d| sup_stat(d, scaling.n_eff)).collect();
    Ok(BootstrapPass {
        scaling,
        estimate,
        fields,
        theta_hat,
        draws,
        sup_stats,
        n: sample.len(),
    })
}

pub(crate) fn conclude(
    pass: &BootstrapPass,
    spec: &TestSpec,
    grid: &EvalGrid,
    c_cs: f64,
    seed: u64,
) -> Result<TestResult> {
    let c_hat_n = match spec.c_hat_override {
        Some(c) => c,
        None => compute_c_hat_n(&pass.sup_stats, pass.scaling.n_eff, c_cs)?,
    };
    let contact = estimate_contact_sets(&pass.fields, c_hat_n)?;
    let theta_star = pass
        .draws
        .par_iter()
        .map(|d| theta_star_contact(d, &contact, grid, spec))
        .collect::<Result<Vec<_>>>()?;
    let theta_star_lfc = pass
        .draws
        .par_iter()
        .map(|d| theta_star_lfc(d, grid, spec))
        .collect::<Result<Vec<_>>>()?;
    let eta_scale = pass.scaling.eta_scale;
    let cv = critical_value(&theta_star, spec.alpha, spec.eta, eta_scale)?;
    let cv_lfc = critical_value(&theta_star_lfc, spec.alpha, spec.eta, eta_scale)?;
    let theta_hat = pass.theta_hat;
    let p_value = if theta_hat <= eta_scale * spec.eta + cv.a_star {
        1.0
    } else {
        theta_star.iter().filter(|t| **t >= theta_hat).count() as f64 / theta_star.len() as f64
    };
    let usable_points = pass.fields.usable_count();
    Ok(TestResult {
        theta_hat,
        c_cs,
        reject: theta_hat > cv.c_alpha_eta,
        reject_lfc: theta_hat > cv_lfc.c_alpha_eta,
        p_value,
        diagnostics: Diagnostics {
            n: pass.n,
            n_eff: pass.scaling.n_eff,
            rates: pass.scaling.rates.clone(),
            eta_scale,
            grid_points: pass.fields.len(),
            usable_points,
            unusable_points: pass.fields.len() - usable_points,
            degenerate_fits: pass.estimate.degenerate_fits,
            contact_points: contact.covered_count(),
            seed,
        },
        summary: BootstrapSummary {
            theta_star,
            theta_star_lfc,
            sup_stats: pass.sup_stats.clone(),
            a_star: cv.a_star,
            c_alpha_star: cv.c_alpha,
            c_alpha_eta_star: cv.c_alpha_eta,
            a_star_lfc: cv_lfc.a_star,
            c_alpha_lfc: cv_lfc.c_alpha,
            c_alpha_eta_lfc: cv_lfc.c_alpha_eta,
        },
        contact,
        fields: pass.fields.clone(),
    })
}

/// Runs the test with one bootstrap pass of `spec.n_boot` draws; draw `b`
/// uses the stream `RandomSource::new(seed, b)`.
pub fn run_test(sample: &Sample, spec: &TestSpec, builder: &dyn FieldBuilder, seed: u64) -> Result<TestResult> {
    let mut out = run_test_multi(sample, spec, builder, seed, &[spec.c_cs])?;
    Ok(out.remove(0))
}

/// Like [`run_test`] for several `C_cs` values sharing the same draws.
pub fn run_test_multi(
    sample: &Sample,
    spec: &TestSpec,
    builder: &dyn FieldBuilder,
    seed: u64,
    c_cs_values: &[f64],
) -> Result<Vec<TestResult>> {
    if c_cs_values.is_empty() {
        return Err(Error::InvalidParameter("no C_cs value given".into()));
    }
    let pass = bootstrap_pass(sample, spec, builder, spec.n_boot, |b| {
        let mut rng = RandomSource::new(seed, b as u64).rng();
        builder.draw_resample(sample, &mut rng)
    })?;
    c_cs_values
        .iter()
        .map(|&c| {
            let mut s = spec.clone();
            s.c_cs = c;
            s.validate()?;
            conclude(&pass, &s, builder.grid(), c, seed)
        })
        .collect()
}
