//! Field builders for the three testing problems: conditional mean
//! inequalities, bid-quantile restrictions in first-price auctions, and
//! differences-in-differences in conditional quantiles.

mod auction;
mod did;
mod mean;

pub use auction::{build_auction_fields, AuctionBuilder, AuctionSpec, LowerBound};
pub use did::{build_did_fields, DiDBuilder, DiDSpec, MEDIAN_TOLERANCE};
pub use mean::{build_mean_fields, MeanBuilder, MeanInequalitySpec};

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, Distribution, OrderStatistics};

use crate::error::{Error, Result};
use crate::estimators::Sample;

/// Per-covariate `[q_lo, q_hi]` sample quantile bounds.
pub fn percentile_region(sample: &Sample, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "percentile bounds must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"
        )));
    }
    (0..sample.dim())
        .map(|m| {
            let mut data = Data::new(sample.covariate(m));
            let (a, b) = (data.quantile(lo), data.quantile(hi));
            if a < b {
                Ok((a, b))
            } else {
                Err(Error::DegenerateCovariate)
            }
        })
        .collect()
}

/// Studentises each covariate and maps it through the standard normal CDF.
pub fn normal_cdf_transform(sample: &Sample) -> Result<Sample> {
    let stats: Vec<(f64, f64)> = (0..sample.dim())
        .map(|m| {
            let data = Data::new(sample.covariate(m));
            let mean = data.mean().unwrap_or(f64::NAN);
            let sd = data.std_dev().unwrap_or(0.0);
            if sd > 0.0 {
                Ok((mean, sd))
            } else {
                Err(Error::DegenerateCovariate)
            }
        })
        .collect::<Result<_>>()?;
    let phi = Normal::standard();
    Ok(sample.map_covariates(|m, v| phi.cdf((v - stats[m].0) / stats[m].1)))
}
