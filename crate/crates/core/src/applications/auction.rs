use serde::{Deserialize, Serialize};

use crate::engine::{field_stack, Estimate, FieldBuilder, FieldStack, Scaling};
use crate::error::{Error, Result};
use crate::estimators::{quantile_surface, Sample, SurfaceOptions, DEFAULT_MASS_FLOOR};
use crate::numerics::{EvalGrid, KernelSpec};

/// Source of the lower support bound `b̲` of bids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LowerBound {
    /// Smallest bid in the sample (or resample).
    #[default]
    SampleMin,
    Supplied(f64),
}

/// Bid-quantile restrictions between auctions with `k` and `k + 1` bidders:
/// `q_k(τ|x) - q_{k+1}(τ|x) ≤ 0` and `b̲ - 2 q_k(τ|x) + q_{k+1}(τ|x) ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuctionSpec {
    pub bidder_counts: (i64, i64),
    pub tau_range: (f64, f64),
    pub tau_points: usize,
    /// Defaults to the 10th to 90th covariate percentiles.
    pub x_region: Option<Vec<(f64, f64)>>,
    pub x_points: usize,
    pub poly_order: usize,
    pub b_lower: LowerBound,
    /// Studentise covariates and map them through the normal CDF first.
    pub cdf_transform: bool,
    pub mass_floor: f64,
}

impl Default for AuctionSpec {
    fn default() -> Self {
        Self {
            bidder_counts: (2, 3),
            tau_range: (0.1, 0.9),
            tau_points: 20,
            x_region: None,
            x_points: 101,
            poly_order: 1,
            b_lower: LowerBound::SampleMin,
            cdf_transform: false,
            mass_floor: DEFAULT_MASS_FLOOR,
        }
    }
}

impl AuctionSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.tau_range;
        if !(a > 0.0 && b < 1.0 && a < b) {
            return Err(Error::InvalidParameter(format!(
                "tau range must lie strictly inside (0, 1), got ({a}, {b})"
            )));
        }
        if self.bidder_counts.0 == self.bidder_counts.1 {
            return Err(Error::InvalidParameter("the two bidder counts must differ".into()));
        }
        if self.tau_points == 0 || self.x_points == 0 {
            return Err(Error::InvalidParameter("grid sizes must be positive".into()));
        }
        if let LowerBound::Supplied(v) = self.b_lower {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("supplied lower bound must be finite".into()));
            }
        }
        Ok(())
    }

    /// Midpoint grid over the region (or its percentile default) times the
    /// `τ` range. Pass the sample after any covariate transform.
    pub fn grid(&self, sample: &Sample) -> Result<EvalGrid> {
        self.validate()?;
        let region = match &self.x_region {
            Some(r) => r.clone(),
            None => super::percentile_region(sample, 0.1, 0.9)?,
        };
        let tau = crate::numerics::Axis::midpoints(self.tau_range.0, self.tau_range.1, self.tau_points)?;
        EvalGrid::midpoint_box(&region, self.x_points, tau)
    }
}

#[derive(Debug, Clone)]
pub struct AuctionBuilder {
    spec: AuctionSpec,
    grid: EvalGrid,
    h: f64,
    kernel: KernelSpec,
}

impl AuctionBuilder {
    pub fn new(spec: &AuctionSpec, grid: EvalGrid, h: f64) -> Result<Self> {
        spec.validate()?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        for t in grid.tau_axis().points() {
            if !(*t > 0.0 && *t < 1.0) {
                return Err(Error::InvalidParameter(format!("tau {t} outside (0, 1)")));
            }
        }
        Ok(Self {
            spec: spec.clone(),
            grid,
            h,
            kernel: KernelSpec::default(),
        })
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    fn options(&self) -> SurfaceOptions {
        SurfaceOptions {
            h: self.h,
            order: self.spec.poly_order,
            kernel: self.kernel,
            mass_floor: self.spec.mass_floor,
        }
    }
}

impl FieldBuilder for AuctionBuilder {
    fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    fn num_inequalities(&self) -> usize {
        2
    }

    fn scaling(&self, sample: &Sample) -> Result<Scaling> {
        let n = sample.len() as f64;
        let hd = self.h.powi(self.grid.x_dim() as i32);
        let r = (n * hd).sqrt();
        Ok(Scaling {
            rates: vec![r, r],
            eta_scale: hd.sqrt(),
            n_eff: n,
        })
    }

    fn estimate(&self, sample: &Sample) -> Result<Estimate> {
        if sample.groups().is_none() {
            return Err(Error::InvalidSample("auction data need bidder counts".into()));
        }
        let (k_lo, k_hi) = self.spec.bidder_counts;
        let opts = self.options();
        let q_lo = quantile_surface(sample, &self.grid, &opts, Some(k_lo))?;
        let q_hi = quantile_surface(sample, &self.grid, &opts, Some(k_hi))?;
        let b = match self.spec.b_lower {
            LowerBound::SampleMin => sample.min_outcome(),
            LowerBound::Supplied(v) => v,
        };
        let g = self.grid.len();
        let mut v1 = vec![0.0; g];
        let mut v2 = vec![0.0; g];
        let mut usable = vec![false; g];
        for k in 0..g {
            if q_lo.usable[k] && q_hi.usable[k] {
                v1[k] = q_lo.q_hat[k] - q_hi.q_hat[k];
                v2[k] = b - 2.0 * q_lo.q_hat[k] + q_hi.q_hat[k];
                usable[k] = true;
            }
        }
        Ok(Estimate {
            v: vec![v1, v2],
            sigma: None,
            usable,
            degenerate_fits: q_lo.degenerate_fits + q_hi.degenerate_fits,
        })
    }
}

/// `û_j = √(n h^d) v̂_j` for the two bid-quantile restrictions.
pub fn build_auction_fields(sample: &Sample, spec: &AuctionSpec, grid: &EvalGrid, h: f64) -> Result<FieldStack> {
    let builder = AuctionBuilder::new(spec, grid.clone(), h)?;
    field_stack(&builder.estimate(sample)?, &builder.scaling(sample)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Axis;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn auctions(n: usize, seed: u64, shift3: f64) -> Sample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut bids = Vec::new();
        let mut x = Vec::new();
        let mut groups = Vec::new();
        for i in 0..n {
            let k = if i % 2 == 0 { 2 } else { 3 };
            let xi: f64 = rng.random_range(0.0..1.0);
            let shift = if k == 3 { shift3 } else { 0.0 };
            bids.push((0..k).map(|_| 1.0 + xi + shift + rng.random_range(0.0..1.0)).collect());
            x.push(vec![xi]);
            groups.push(k as i64);
        }
        Sample::new(bids, x).unwrap().with_groups(groups).unwrap()
    }

    fn spec() -> AuctionSpec {
        AuctionSpec {
            x_points: 5,
            tau_points: 4,
            mass_floor: 2.0,
            ..AuctionSpec::default()
        }
    }

    #[test]
    fn formulas_at_a_point() {
        // one x node, two auctions per group at that node
        let s = Sample::new(
            vec![vec![5.0, 5.0], vec![5.0, 5.0], vec![7.0, 7.0, 7.0], vec![1.0, 7.0, 7.0]],
            vec![vec![0.0]; 4],
        )
        .unwrap()
        .with_groups(vec![2, 2, 3, 3])
        .unwrap();
        let g = EvalGrid::new(vec![Axis::singleton(0.0)], Axis::singleton(0.5)).unwrap();
        let sp = AuctionSpec {
            poly_order: 0,
            mass_floor: 0.0,
            ..AuctionSpec::default()
        };
        let b = AuctionBuilder::new(&sp, g, 1.0).unwrap();
        let est = b.estimate(&s).unwrap();
        assert_eq!(est.v[0][0], -2.0);
        assert_eq!(est.v[1][0], 1.0 - 10.0 + 7.0);
    }

    #[test]
    fn bid_shift_leaves_fields_unchanged() {
        let s = auctions(120, 4, 0.2);
        let sp = spec();
        let g = sp.grid(&s).unwrap();
        let a = build_auction_fields(&s, &sp, &g, 0.4).unwrap();
        let b = build_auction_fields(&s.map_outcomes(|v| v + 0.75), &sp, &g, 0.4).unwrap();
        assert_eq!(a.usable, b.usable);
        for j in 0..2 {
            for k in 0..g.len() {
                assert_abs_diff_eq!(a.u[j][k], b.u[j][k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn swapping_groups_is_antisymmetric() {
        let s = auctions(120, 5, 0.1);
        let sp = spec();
        let g = sp.grid(&s).unwrap();
        let ab = AuctionBuilder::new(&sp, g.clone(), 0.4).unwrap().estimate(&s).unwrap();
        let swapped = AuctionSpec {
            bidder_counts: (3, 2),
            ..sp.clone()
        };
        let ba = AuctionBuilder::new(&swapped, g.clone(), 0.4).unwrap().estimate(&s).unwrap();
        let opts = SurfaceOptions {
            h: 0.4,
            order: sp.poly_order,
            kernel: KernelSpec::default(),
            mass_floor: sp.mass_floor,
        };
        let q2 = quantile_surface(&s, &g, &opts, Some(2)).unwrap();
        let q3 = quantile_surface(&s, &g, &opts, Some(3)).unwrap();
        let bmin = s.min_outcome();
        for k in 0..g.len() {
            if !ab.usable[k] {
                continue;
            }
            assert_eq!(ba.v[0][k], -ab.v[0][k]);
            assert_eq!(ba.v[1][k], bmin - 2.0 * q3.q_hat[k] + q2.q_hat[k]);
        }
    }

    #[test]
    fn missing_group_is_an_error() {
        let s = auctions(40, 6, 0.0);
        let only_two: Vec<usize> = (0..40).filter(|i| s.group(*i) == Some(2)).collect();
        let sub = s.select(&only_two);
        let sp = spec();
        let g = sp.grid(&s).unwrap();
        assert!(matches!(
            build_auction_fields(&sub, &sp, &g, 0.4),
            Err(Error::InvalidSample(_))
        ));
        let bad = AuctionSpec {
            tau_range: (0.0, 0.9),
            ..AuctionSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sample_min_lower_bound() {
        let s = Sample::new(vec![vec![3.0, 1.0], vec![2.0, 5.0, 4.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(s.min_outcome(), 1.0);
    }
}
