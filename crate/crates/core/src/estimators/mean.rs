use crate::error::{Error, Result};
use crate::estimators::sample::Sample;
use crate::numerics::{product_kernel, EvalGrid, KernelSpec};

/// Default usability threshold, in effective observations.
pub const DEFAULT_MASS_FLOOR: f64 = 5.0;

/// Local constant mean estimate and its scale on a grid.
///
/// `v_hat(x) = (1/(n h^d)) Σ w_i Y_i K((X_i - x)/h)` and
/// `sigma_hat(x)^2 = (1/(n h^d)) Σ w_i Y_i^2 K((X_i - x)/h)^2`, with rows
/// carrying several outcomes contributing each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub v_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    /// `Σ_i w_i K((X_i - x)/h)` at each grid point.
    pub effective_mass: Vec<f64>,
    /// `effective_mass ≥ mass_floor · max_i w_i` and `sigma_hat > 0`.
    pub usable: Vec<bool>,
}

impl MeanField {
    pub fn unusable_count(&self) -> usize {
        self.usable.iter().filter(|u| !**u).count()
    }
}

pub fn local_constant_mean(
    sample: &Sample,
    grid: &EvalGrid,
    h: f64,
    kernel: &KernelSpec,
) -> Result<MeanField> {
    local_constant_mean_weighted(sample, grid, h, kernel, DEFAULT_MASS_FLOOR, None)
}

/// Like [`local_constant_mean`], with an explicit usability floor and
/// optional per-row multiplicities.
///
/// A multiplicity vector `m` evaluates the estimator on the sample in which
/// row `i` appears `m_i` times, without materialising it; the normalising
/// `n` is then `Σ m_i`. Bootstrap resamples are evaluated this way.
pub fn local_constant_mean_weighted(
    sample: &Sample,
    grid: &EvalGrid,
    h: f64,
    kernel: &KernelSpec,
    mass_floor: f64,
    multiplicity: Option<&[f64]>,
) -> Result<MeanField> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    if sample.is_empty() {
        return Err(Error::EmptyInput("mean estimator on an empty sample".into()));
    }
    if grid.x_dim() != sample.dim() {
        return Err(Error::ShapeMismatch {
            expected: sample.dim(),
            actual: grid.x_dim(),
        });
    }
    if let Some(m) = multiplicity {
        if m.len() != sample.len() {
            return Err(Error::ShapeMismatch {
                expected: sample.len(),
                actual: m.len(),
            });
        }
    }
    let d = sample.dim();
    let n = match multiplicity {
        Some(m) => m.iter().sum::<f64>(),
        None => sample.len() as f64,
    };
    let norm = 1.0 / (n * h.powi(d as i32));
    let max_w = sample.max_weight();
    let floor = mass_floor * max_w;

    let n_x = grid.n_x();
    let mut v_x = vec![0.0; n_x];
    let mut s_x = vec![0.0; n_x];
    let mut mass_x = vec![0.0; n_x];
    let mut u = vec![0.0; d];
    for (ix, point) in grid.x_points().iter().enumerate() {
        let (mut v, mut s2, mut mass) = (0.0, 0.0, 0.0);
        for i in 0..sample.len() {
            let mi = multiplicity.map_or(1.0, |m| m[i]);
            if mi == 0.0 {
                continue;
            }
            for (um, (xi, xm)) in u.iter_mut().zip(sample.x(i).iter().zip(point)) {
                *um = (xi - xm) / h;
            }
            let k = product_kernel(kernel, &u);
            if k == 0.0 {
                continue;
            }
            let w = mi * sample.weight(i);
            mass += w * k;
            for y in sample.outcomes(i) {
                v += w * y * k;
                s2 += w * y * y * k * k;
            }
        }
        v_x[ix] = v * norm;
        s_x[ix] = (s2 * norm).sqrt();
        mass_x[ix] = mass;
    }

    let total = grid.len();
    let mut field = MeanField {
        v_hat: Vec::with_capacity(total),
        sigma_hat: Vec::with_capacity(total),
        effective_mass: Vec::with_capacity(total),
        usable: Vec::with_capacity(total),
    };
    for _ in 0..grid.n_tau() {
        for ix in 0..n_x {
            field.v_hat.push(v_x[ix]);
            field.sigma_hat.push(s_x[ix]);
            field.effective_mass.push(mass_x[ix]);
            field
                .usable
                .push(mass_x[ix] > 0.0 && mass_x[ix] >= floor && s_x[ix] > 0.0);
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{kernel_eval, Axis};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn single_node(x: f64) -> EvalGrid {
        EvalGrid::over_x(vec![Axis::midpoints(x - 0.5, x + 0.5, 1).unwrap()]).unwrap()
    }

    #[test]
    fn single_observation_at_node() {
        let s = Sample::univariate(vec![2.0], vec![0.0]).unwrap();
        let f = local_constant_mean_weighted(&s, &single_node(0.0), 1.0, &KernelSpec::default(), 0.0, None)
            .unwrap();
        assert_eq!(f.v_hat[0], 3.0);
        assert_eq!(f.sigma_hat[0], 3.0);
        assert!(f.usable[0]);
    }

    #[test]
    fn point_outside_support_is_unusable() {
        let s = Sample::univariate(vec![2.0, 1.0], vec![0.0, 0.1]).unwrap();
        let f = local_constant_mean_weighted(&s, &single_node(3.0), 1.0, &KernelSpec::default(), 0.0, None)
            .unwrap();
        assert_eq!(f.v_hat[0], 0.0);
        assert_eq!(f.sigma_hat[0], 0.0);
        assert!(!f.usable[0]);
    }

    #[test]
    fn errors() {
        let s = Sample::univariate(vec![2.0], vec![0.0]).unwrap();
        let g = single_node(0.0);
        let k = KernelSpec::default();
        assert!(local_constant_mean(&s, &g, 0.0, &k).is_err());
        assert!(local_constant_mean(&s, &g, -1.0, &k).is_err());
        let s2 = Sample::scalar(vec![1.0], vec![vec![0.0, 0.0]]).unwrap();
        assert!(local_constant_mean(&s2, &g, 1.0, &k).is_err());
    }

    #[test]
    fn matches_direct_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 80;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let s = Sample::univariate(y.clone(), x.clone()).unwrap();
        let g = EvalGrid::over_x(vec![Axis::midpoints(-1.8, 1.8, 37).unwrap()]).unwrap();
        let h = 0.7;
        let k = KernelSpec::default();
        let f = local_constant_mean(&s, &g, h, &k).unwrap();
        for (ix, pt) in g.x_points().iter().enumerate() {
            let mut v = 0.0;
            let mut s2 = 0.0;
            let mut mass = 0.0;
            for i in 0..n {
                let kv = kernel_eval(&k, (x[i] - pt[0]) / h);
                v += y[i] * kv;
                s2 += y[i] * y[i] * kv * kv;
                mass += kv;
            }
            v /= n as f64 * h;
            s2 /= n as f64 * h;
            assert_abs_diff_eq!(f.v_hat[ix], v, epsilon = 1e-12);
            assert_abs_diff_eq!(f.sigma_hat[ix], s2.sqrt(), epsilon = 1e-12);
            assert_eq!(f.usable[ix], mass >= 5.0 && s2 > 0.0);
        }
    }

    #[test]
    fn multiplicity_equals_materialised_resample() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let s = Sample::univariate(y, x).unwrap();
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut m = vec![0.0; n];
        for &i in &idx {
            m[i] += 1.0;
        }
        let g = EvalGrid::over_x(vec![Axis::midpoints(-1.8, 1.8, 21).unwrap()]).unwrap();
        let k = KernelSpec::default();
        let a = local_constant_mean_weighted(&s, &g, 0.8, &k, 5.0, Some(&m)).unwrap();
        let b = local_constant_mean_weighted(&s.select(&idx), &g, 0.8, &k, 5.0, None).unwrap();
        for i in 0..g.len() {
            assert_abs_diff_eq!(a.v_hat[i], b.v_hat[i], epsilon = 1e-12);
            assert_abs_diff_eq!(a.sigma_hat[i], b.sigma_hat[i], epsilon = 1e-12);
            assert_eq!(a.usable[i], b.usable[i]);
        }
    }

    #[test]
    fn linear_in_outcome_and_studentisation_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        let s = Sample::univariate(y, x).unwrap();
        let g = EvalGrid::over_x(vec![Axis::midpoints(-1.5, 1.5, 31).unwrap()]).unwrap();
        let k = KernelSpec::default();
        let base = local_constant_mean(&s, &g, 0.9, &k).unwrap();
        for a in [-3.0, 0.5, 4.0] {
            let scaled = local_constant_mean(&s.map_outcomes(|v| a * v), &g, 0.9, &k).unwrap();
            for i in 0..g.len() {
                assert_abs_diff_eq!(scaled.v_hat[i], a * base.v_hat[i], epsilon = 1e-12);
                assert_abs_diff_eq!(scaled.sigma_hat[i], a.abs() * base.sigma_hat[i], epsilon = 1e-12);
                if base.usable[i] && a > 0.0 {
                    assert_abs_diff_eq!(
                        scaled.v_hat[i] / scaled.sigma_hat[i],
                        base.v_hat[i] / base.sigma_hat[i],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }
}
