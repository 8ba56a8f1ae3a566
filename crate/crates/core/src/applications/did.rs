use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{field_stack, Estimate, FieldBuilder, FieldStack, Scaling};
use crate::error::{Error, Result};
use crate::estimators::{quantile_surface, Sample, SurfaceOptions, DEFAULT_MASS_FLOOR};
use crate::numerics::{Axis, EvalGrid, KernelSpec, StreamRng};

/// How close a `τ` node must be to 0.5 to serve as the median row.
pub const MEDIAN_TOLERANCE: f64 = 1e-9;

/// `H0: Δ_{t,s}(τ, x) ≥ 0` where
/// `Δ = [q_t(τ|x) - q_s(τ|x)] - [q_t(.5|x) - q_s(.5|x)]`; rows are grouped
/// by period label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiDSpec {
    pub period_t: i64,
    pub period_s: i64,
    pub h_t: f64,
    pub h_s: f64,
    #[serde(default = "default_order")]
    pub poly_order: usize,
    /// Defaults to the 10th to 90th covariate percentiles.
    #[serde(default)]
    pub x_region: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    #[serde(default = "default_tau_range")]
    pub tau_range: (f64, f64),
    /// Must be odd so the midpoint grid contains 0.5 on a symmetric range.
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
    #[serde(default = "default_mass_floor")]
    pub mass_floor: f64,
}

fn default_order() -> usize {
    1
}
fn default_x_points() -> usize {
    101
}
fn default_tau_range() -> (f64, f64) {
    (0.1, 0.9)
}
fn default_tau_points() -> usize {
    17
}
fn default_mass_floor() -> f64 {
    DEFAULT_MASS_FLOOR
}

impl DiDSpec {
    pub fn new(period_t: i64, period_s: i64, h_t: f64, h_s: f64) -> Self {
        Self {
            period_t,
            period_s,
            h_t,
            h_s,
            poly_order: default_order(),
            x_region: None,
            x_points: default_x_points(),
            tau_range: default_tau_range(),
            tau_points: default_tau_points(),
            mass_floor: default_mass_floor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_t == self.period_s {
            return Err(Error::InvalidParameter("the two periods must differ".into()));
        }
        for h in [self.h_t, self.h_s] {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        let (a, b) = self.tau_range;
        if !(a > 0.0 && b < 1.0 && a < b) {
            return Err(Error::InvalidParameter(format!(
                "tau range must lie strictly inside (0, 1), got ({a}, {b})"
            )));
        }
        Ok(())
    }

    /// Midpoint grid over the region (or percentile default) times the `τ`
    /// range.
    pub fn grid(&self, sample: &Sample) -> Result<EvalGrid> {
        self.validate()?;
        let region = match &self.x_region {
            Some(r) => r.clone(),
            None => super::percentile_region(sample, 0.1, 0.9)?,
        };
        let tau = Axis::midpoints(self.tau_range.0, self.tau_range.1, self.tau_points)?;
        EvalGrid::midpoint_box(&region, self.x_points, tau)
    }
}

#[derive(Debug, Clone)]
pub struct DiDBuilder {
    spec: DiDSpec,
    grid: EvalGrid,
    median_row: usize,
    kernel: KernelSpec,
}

impl DiDBuilder {
    pub fn new(spec: &DiDSpec, grid: EvalGrid) -> Result<Self> {
        spec.validate()?;
        let median_row = grid
            .tau_axis()
            .points()
            .iter()
            .position(|t| (t - 0.5).abs() <= MEDIAN_TOLERANCE)
            .ok_or_else(|| Error::InvalidParameter("the tau grid must contain 0.5".into()))?;
        Ok(Self {
            spec: spec.clone(),
            grid,
            median_row,
            kernel: KernelSpec::default(),
        })
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    fn period_sizes(&self, sample: &Sample) -> Result<(usize, usize)> {
        let counts = sample.group_counts();
        let get = |p: i64| counts.get(&p).copied().unwrap_or(0);
        let (nt, ns) = (get(self.spec.period_t), get(self.spec.period_s));
        if nt == 0 || ns == 0 {
            let missing = if nt == 0 { self.spec.period_t } else { self.spec.period_s };
            return Err(Error::InvalidSample(format!("period {missing} has no observations")));
        }
        Ok((nt, ns))
    }

    fn options(&self, h: f64) -> SurfaceOptions {
        SurfaceOptions {
            h,
            order: self.spec.poly_order,
            kernel: self.kernel,
            mass_floor: self.spec.mass_floor,
        }
    }
}

impl FieldBuilder for DiDBuilder {
    fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    fn num_inequalities(&self) -> usize {
        1
    }

    /// `r = √(a b / (a + b))` with `a = n_t h_t^d`, `b = n_s h_s^d`; the
    /// `η` floor uses the geometric mean bandwidth and `ĉ_n` the mean period
    /// size.
    fn scaling(&self, sample: &Sample) -> Result<Scaling> {
        let (nt, ns) = self.period_sizes(sample)?;
        let d = self.grid.x_dim() as i32;
        let a = nt as f64 * self.spec.h_t.powi(d);
        let b = ns as f64 * self.spec.h_s.powi(d);
        let h_bar = (self.spec.h_t * self.spec.h_s).sqrt();
        Ok(Scaling {
            rates: vec![(a * b / (a + b)).sqrt()],
            eta_scale: h_bar.powi(d).sqrt(),
            n_eff: (nt + ns) as f64 / 2.0,
        })
    }

    fn estimate(&self, sample: &Sample) -> Result<Estimate> {
        self.period_sizes(sample)?;
        let qt = quantile_surface(sample, &self.grid, &self.options(self.spec.h_t), Some(self.spec.period_t))?;
        let qs = quantile_surface(sample, &self.grid, &self.options(self.spec.h_s), Some(self.spec.period_s))?;
        let n_x = self.grid.n_x();
        let g = self.grid.len();
        let mut v = vec![0.0; g];
        let mut usable = vec![false; g];
        for k in 0..g {
            let (_, ix) = self.grid.split_index(k);
            let m = self.grid.index(self.median_row, ix);
            if qt.usable[k] && qs.usable[k] && qt.usable[m] && qs.usable[m] {
                let delta = (qt.q_hat[k] - qs.q_hat[k]) - (qt.q_hat[m] - qs.q_hat[m]);
                v[k] = -delta;
                usable[k] = true;
            }
        }
        debug_assert_eq!(g % n_x, 0);
        Ok(Estimate {
            v: vec![v],
            sigma: None,
            usable,
            degenerate_fits: qt.degenerate_fits + qs.degenerate_fits,
        })
    }

    /// Resamples within each period, keeping period sizes fixed.
    fn draw_resample(&self, sample: &Sample, rng: &mut StreamRng) -> Vec<usize> {
        let mut out = Vec::with_capacity(sample.len());
        for p in [self.spec.period_t, self.spec.period_s] {
            let rows = sample.group_indices(p);
            out.extend((0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]));
        }
        out
    }
}

/// `û = r v̂` with `v̂ = -Δ̂_{t,s}`.
pub fn build_did_fields(sample: &Sample, spec: &DiDSpec, grid: &EvalGrid) -> Result<FieldStack> {
    let builder = DiDBuilder::new(spec, grid.clone())?;
    field_stack(&builder.estimate(sample)?, &builder.scaling(sample)?)
}
