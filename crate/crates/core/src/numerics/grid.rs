use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform midpoint axis over `[lo, hi]`.
///
/// A singleton axis (`lo == hi`, one point) contributes a factor of one to
/// the cell measure, so a fixed `τ` is treated as an index rather than
/// integrated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    lo: f64,
    hi: f64,
    points: Vec<f64>,
}

impl Axis {
    /// `n` cell centres of the uniform partition of `[lo, hi]`.
    pub fn midpoints(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("axis needs at least one point".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let two_n = 2.0 * n as f64;
        // convex combination form keeps symmetric centres exact (e.g. 0.5)
        let points = (0..n)
            .map(|k| {
                let right = (2 * k + 1) as f64;
                (lo * (two_n - right) + hi * right) / two_n
            })
            .collect();
        Ok(Self { lo, hi, points })
    }

    pub fn singleton(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            points: vec![value],
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Cell width, or 1 for a singleton axis.
    pub fn spacing(&self) -> f64 {
        if self.is_singleton() {
            1.0
        } else {
            (self.hi - self.lo) / self.points.len() as f64
        }
    }
}

/// Finite product grid over `𝒳 × 𝒯` discretising Lebesgue measure.
///
/// Points are stored with `τ` outermost: flat index `t · n_x + ix`, where
/// `ix` runs over the covariate axes in row-major order (first axis slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalGrid {
    x_axes: Vec<Axis>,
    tau_axis: Axis,
}

impl EvalGrid {
    pub fn new(x_axes: Vec<Axis>, tau_axis: Axis) -> Result<Self> {
        if x_axes.is_empty() {
            return Err(Error::InvalidParameter(
                "grid needs at least one covariate axis".into(),
            ));
        }
        Ok(Self { x_axes, tau_axis })
    }

    /// Covariate-only grid (no `τ` dimension).
    pub fn over_x(x_axes: Vec<Axis>) -> Result<Self> {
        Self::new(x_axes, Axis::singleton(0.5))
    }

    /// Uniform midpoint grid over a box with `per_axis` points per dimension.
    pub fn midpoint_box(bounds: &[(f64, f64)], per_axis: usize, tau_axis: Axis) -> Result<Self> {
        let axes = bounds
            .iter()
            .map(|&(lo, hi)| Axis::midpoints(lo, hi, per_axis))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes, tau_axis)
    }

    pub fn x_axes(&self) -> &[Axis] {
        &self.x_axes
    }

    pub fn tau_axis(&self) -> &Axis {
        &self.tau_axis
    }

    pub fn x_dim(&self) -> usize {
        self.x_axes.len()
    }

    pub fn n_x(&self) -> usize {
        self.x_axes.iter().map(Axis::len).product()
    }

    pub fn n_tau(&self) -> usize {
        self.tau_axis.len()
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_tau()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Measure of every cell: product of spacings, times the `τ` spacing
    /// when `𝒯` is an interval.
    pub fn cell_measure(&self) -> f64 {
        self.x_axes.iter().map(Axis::spacing).product::<f64>() * self.tau_axis.spacing()
    }

    pub fn total_measure(&self) -> f64 {
        self.cell_measure() * self.len() as f64
    }

    /// Covariate coordinates of the `ix`-th covariate node.
    pub fn x_point(&self, mut ix: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.x_axes.len()];
        for (m, axis) in self.x_axes.iter().enumerate().rev() {
            out[m] = axis.points()[ix % axis.len()];
            ix /= axis.len();
        }
        out
    }

    /// All covariate nodes, in index order.
    pub fn x_points(&self) -> Vec<Vec<f64>> {
        (0..self.n_x()).map(|ix| self.x_point(ix)).collect()
    }

    pub fn index(&self, tau_index: usize, x_index: usize) -> usize {
        tau_index * self.n_x() + x_index
    }

    /// `(τ index, x index)` of a flat grid index.
    pub fn split_index(&self, flat: usize) -> (usize, usize) {
        (flat / self.n_x(), flat % self.n_x())
    }

    pub fn tau_at(&self, flat: usize) -> f64 {
        self.tau_axis.points()[flat / self.n_x()]
    }
}

/// `Σ field · cell_measure` over grid points selected by `mask`
/// (all points when `mask` is `None`).
pub fn riemann_integrate(field: &[f64], grid: &EvalGrid, mask: Option<&[bool]>) -> Result<f64> {
    if field.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            actual: field.len(),
        });
    }
    let measure = grid.cell_measure();
    match mask {
        None => Ok(field.iter().map(|f| f * measure).sum()),
        Some(mask) => {
            if mask.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.len(),
                    actual: mask.len(),
                });
            }
            Ok(field
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(f, _)| f * measure)
                .sum())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_grid(n: usize) -> EvalGrid {
        EvalGrid::over_x(vec![Axis::midpoints(0.0, 1.0, n).unwrap()]).unwrap()
    }

    #[test]
    fn midpoints_are_cell_centres() {
        let a = Axis::midpoints(0.0, 1.0, 4).unwrap();
        assert_eq!(a.points(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(a.spacing(), 0.25);
        let t = Axis::midpoints(0.1, 0.9, 17).unwrap();
        assert_eq!(t.points()[8], 0.5);
        assert!(Axis::midpoints(1.0, 1.0, 3).is_err());
        assert!(Axis::midpoints(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn measures() {
        let g = EvalGrid::midpoint_box(&[(-1.8, 1.8)], 101, Axis::singleton(0.5)).unwrap();
        assert_abs_diff_eq!(g.total_measure(), 3.6, epsilon = 1e-12);
        let g2 = EvalGrid::midpoint_box(
            &[(0.0, 2.0), (0.0, 1.0)],
            10,
            Axis::midpoints(0.1, 0.9, 4).unwrap(),
        )
        .unwrap();
        assert_eq!(g2.len(), 400);
        assert_abs_diff_eq!(g2.total_measure(), 2.0 * 0.8, epsilon = 1e-12);
        assert!(g2.cell_measure() > 0.0);
    }

    #[test]
    fn point_indexing() {
        let g = EvalGrid::midpoint_box(
            &[(0.0, 2.0), (0.0, 1.0)],
            2,
            Axis::midpoints(0.0, 1.0, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(g.x_point(0), vec![0.5, 0.25]);
        assert_eq!(g.x_point(1), vec![0.5, 0.75]);
        assert_eq!(g.x_point(2), vec![1.5, 0.25]);
        let flat = g.index(1, 2);
        assert_eq!(g.split_index(flat), (1, 2));
        assert_eq!(g.tau_at(flat), 0.75);
    }

    #[test]
    fn integrate_constant_and_masks() {
        let g = unit_grid(100);
        let ones = vec![1.0; 100];
        assert_abs_diff_eq!(riemann_integrate(&ones, &g, None).unwrap(), 1.0, epsilon = 1e-12);
        let none = vec![false; 100];
        assert_eq!(riemann_integrate(&ones, &g, Some(&none)).unwrap(), 0.0);
        assert!(matches!(
            riemann_integrate(&ones[..50], &g, None),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(riemann_integrate(&ones, &g, Some(&none[..3])).is_err());
    }

    #[test]
    fn integrate_matches_naive_sum() {
        let g = unit_grid(257);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let field: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
        let full = vec![true; g.len()];
        let mut naive = 0.0;
        for f in &field {
            naive += f * (1.0 / 257.0);
        }
        let got = riemann_integrate(&field, &g, Some(&full)).unwrap();
        assert_abs_diff_eq!(got, naive, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn integrate_linear_and_additive(
            a in prop::collection::vec(-5.0f64..5.0, 40),
            b in prop::collection::vec(-5.0f64..5.0, 40),
            mask in prop::collection::vec(any::<bool>(), 40),
            c in -3.0f64..3.0,
        ) {
            let g = unit_grid(40);
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
            let lhs = riemann_integrate(&combo, &g, None).unwrap();
            let rhs = c * riemann_integrate(&a, &g, None).unwrap() + riemann_integrate(&b, &g, None).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);

            let complement: Vec<bool> = mask.iter().map(|m| !m).collect();
            let split = riemann_integrate(&a, &g, Some(&mask)).unwrap()
                + riemann_integrate(&a, &g, Some(&complement)).unwrap();
            prop_assert!((split - riemann_integrate(&a, &g, None).unwrap()).abs() < 1e-10);
        }
    }
}
