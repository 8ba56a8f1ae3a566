use serde::{Deserialize, Serialize};

use crate::engine::{field_stack, Estimate, FieldBuilder, FieldStack, Scaling};
use crate::error::{Error, Result};
use crate::estimators::{local_constant_mean_weighted, Sample, DEFAULT_MASS_FLOOR};
use crate::numerics::{EvalGrid, KernelSpec};

/// `H0: E[Y - θ | X = x] ≤ 0` for all `x` in the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanInequalitySpec {
    pub theta: f64,
    /// One `(lo, hi)` interval per covariate.
    pub x_region: Vec<(f64, f64)>,
}

/// Studentised local constant mean of `Y - θ`.
#[derive(Debug, Clone)]
pub struct MeanBuilder {
    grid: EvalGrid,
    theta: f64,
    h: f64,
    kernel: KernelSpec,
    mass_floor: f64,
}

impl MeanBuilder {
    pub fn new(spec: &MeanInequalitySpec, grid: EvalGrid, h: f64) -> Result<Self> {
        if grid.n_tau() != 1 {
            return Err(Error::InvalidParameter("the mean test takes a grid over x only".into()));
        }
        if spec.x_region.len() != grid.x_dim() {
            return Err(Error::ShapeMismatch {
                expected: spec.x_region.len(),
                actual: grid.x_dim(),
            });
        }
        for (axis, &(lo, hi)) in grid.x_axes().iter().zip(&spec.x_region) {
            let (a, b) = axis.bounds();
            if a < lo - 1e-12 || b > hi + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "grid [{a}, {b}] leaves the test region [{lo}, {hi}]"
                )));
            }
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        if !spec.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(Self {
            grid,
            theta: spec.theta,
            h,
            kernel: KernelSpec::default(),
            mass_floor: DEFAULT_MASS_FLOOR,
        })
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_mass_floor(mut self, floor: f64) -> Self {
        self.mass_floor = floor;
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    fn estimate_with(&self, sample: &Sample, multiplicity: Option<&[f64]>) -> Result<Estimate> {
        let theta = self.theta;
        let shifted = sample.map_outcomes(|y| y - theta);
        let field = local_constant_mean_weighted(
            &shifted,
            &self.grid,
            self.h,
            &self.kernel,
            self.mass_floor,
            multiplicity,
        )?;
        Ok(Estimate {
            v: vec![field.v_hat],
            sigma: Some(vec![field.sigma_hat]),
            usable: field.usable,
            degenerate_fits: 0,
        })
    }
}

impl FieldBuilder for MeanBuilder {
    fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    fn num_inequalities(&self) -> usize {
        1
    }

    fn scaling(&self, sample: &Sample) -> Result<Scaling> {
        let n = sample.len() as f64;
        let hd = self.h.powi(self.grid.x_dim() as i32);
        Ok(Scaling {
            rates: vec![(n * hd).sqrt()],
            eta_scale: hd.sqrt(),
            n_eff: n,
        })
    }

    fn estimate(&self, sample: &Sample) -> Result<Estimate> {
        self.estimate_with(sample, None)
    }

    fn estimate_resampled(&self, sample: &Sample, indices: &[usize]) -> Result<Estimate> {
        let mut counts = vec![0.0; sample.len()];
        for &i in indices {
            counts[i] += 1.0;
        }
        self.estimate_with(sample, Some(&counts))
    }
}

/// `û = √(n h^d) v̂ / σ̂` for the mean inequality.
pub fn build_mean_fields(sample: &Sample, spec: &MeanInequalitySpec, grid: &EvalGrid, h: f64) -> Result<FieldStack> {
    let builder = MeanBuilder::new(spec, grid.clone(), h)?;
    field_stack(&builder.estimate(sample)?, &builder.scaling(sample)?)
}
