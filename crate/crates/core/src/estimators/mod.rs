//! Kernel estimators: local constant mean regression with its scale, and
//! local polynomial quantile regression by exact check-loss minimisation.

mod mean;
mod qr;
mod quantile;
mod sample;

pub use mean::{local_constant_mean, local_constant_mean_weighted, MeanField, DEFAULT_MASS_FLOOR};
pub use quantile::{
    basis_exponents, check_loss, local_poly_quantile, polynomial_basis, quantile_surface, QuantileFit,
    QuantileSurface, SurfaceOptions,
};
pub use sample::Sample;
