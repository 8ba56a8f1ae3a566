use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::qr::{minimize_check_loss, rho, QrFailure};
use crate::estimators::sample::Sample;
use crate::numerics::{product_kernel, EvalGrid, KernelSpec};

/// Check loss `l_τ(u) = (|u| + (2τ - 1)u) / 2`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(rho(u, tau))
}

/// Multi-indices `u` with `[u] ≤ r`, graded lexicographic: by total degree,
/// then with larger powers of earlier coordinates first. The first entry is
/// the zero index (the constant term).
pub fn basis_exponents(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for degree in 0..=r {
        let mut current = vec![0; d];
        fill(d, 0, degree, &mut current, &mut out);
    }
    out
}

fn fill(d: usize, pos: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == d {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(d, pos + 1, remaining - e, current, out);
    }
    current[pos] = 0;
}

/// `c(z) = (z^u)_{u ∈ A_r}` in the order of [`basis_exponents`].
pub fn polynomial_basis(z: &[f64], r: usize) -> Vec<f64> {
    basis_exponents(z.len(), r)
        .iter()
        .map(|u| z.iter().zip(u).map(|(zm, &um)| zm.powi(um as i32)).product())
        .collect()
}

/// Local polynomial quantile fit at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub gamma_hat: Vec<f64>,
    /// `e₁ᵀ γ̂`, the conditional quantile estimate.
    pub q_hat: f64,
    /// Achieved weighted check-loss sum at `gamma_hat`.
    pub objective: f64,
    /// Non-unique optimum or degenerate optimal vertex; the lexicographically
    /// smallest optimal coefficient vector was returned.
    pub degenerate: bool,
    /// `Σ_i w_i K_i` over the active rows, counting each outcome.
    pub effective_mass: f64,
}

/// Kernel-weighted design around one evaluation point, reusable across `τ`.
#[derive(Debug, Clone)]
pub(crate) struct LocalDesign {
    point: Vec<f64>,
    p: usize,
    design: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    pub(crate) effective_mass: f64,
}

impl LocalDesign {
    pub(crate) fn build(
        sample: &Sample,
        point: &[f64],
        h: f64,
        order: usize,
        group: Option<i64>,
        kernel: &KernelSpec,
    ) -> Self {
        let d = point.len();
        let exponents = basis_exponents(d, order);
        let p = exponents.len();
        let mut design = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut z = vec![0.0; d];
        let mut mass = 0.0;
        for i in 0..sample.len() {
            if let Some(g) = group {
                if sample.group(i) != Some(g) {
                    continue;
                }
            }
            for (zm, (xi, xm)) in z.iter_mut().zip(sample.x(i).iter().zip(point)) {
                *zm = (xi - xm) / h;
            }
            let k = product_kernel(kernel, &z);
            let weight = k * sample.weight(i);
            if weight <= 0.0 {
                continue;
            }
            let row: Vec<f64> = exponents
                .iter()
                .map(|u| z.iter().zip(u).map(|(zm, &um)| zm.powi(um as i32)).product())
                .collect();
            for &b in sample.outcomes(i) {
                design.extend_from_slice(&row);
                y.push(b);
                w.push(weight);
                mass += weight;
            }
        }
        Self {
            point: point.to_vec(),
            p,
            design,
            y,
            w,
            effective_mass: mass,
        }
    }

    pub(crate) fn active(&self) -> usize {
        self.y.len()
    }

    pub(crate) fn fit(&self, tau: f64) -> Result<QuantileFit> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0, 1), got {tau}")));
        }
        let insufficient = || Error::InsufficientLocalData {
            point: self.point.clone(),
            active: self.active(),
            needed: self.p,
        };
        if self.active() < self.p {
            return Err(insufficient());
        }
        let sol = match minimize_check_loss(&self.design, &self.y, &self.w, self.p, tau) {
            Ok(s) => s,
            Err(QrFailure::RankDeficient) => return Err(insufficient()),
            Err(QrFailure::IterationLimit) => {
                return Err(Error::Numerical(format!(
                    "quantile fit at {:?} did not terminate",
                    self.point
                )))
            }
        };
        // objective re-evaluated on the unmerged rows
        let objective = (0..self.active())
            .map(|i| {
                let fit: f64 = self.design[i * self.p..(i + 1) * self.p]
                    .iter()
                    .zip(&sol.gamma)
                    .map(|(c, g)| c * g)
                    .sum();
                self.w[i] * rho(self.y[i] - fit, tau)
            })
            .sum();
        Ok(QuantileFit {
            q_hat: sol.gamma[0],
            gamma_hat: sol.gamma,
            objective,
            degenerate: sol.degenerate,
            effective_mass: self.effective_mass,
        })
    }
}

/// Minimises `Σ_i 1{L_i = k} Σ_ℓ w_i l_τ(B_ℓi - γᵀc((X_i - x)/h)) K((x - X_i)/h)`
/// exactly.
#[allow(clippy::too_many_arguments)]
pub fn local_poly_quantile(
    sample: &Sample,
    x: &[f64],
    tau: f64,
    h: f64,
    order: usize,
    group: Option<i64>,
    kernel: &KernelSpec,
) -> Result<QuantileFit> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    if x.len() != sample.dim() {
        return Err(Error::ShapeMismatch {
            expected: sample.dim(),
            actual: x.len(),
        });
    }
    LocalDesign::build(sample, x, h, order, group, kernel).fit(tau)
}

/// `q̂(τ|x)` over a grid with usability flags.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSurface {
    pub q_hat: Vec<f64>,
    pub usable: Vec<bool>,
    /// Number of usable points whose fit was flagged degenerate.
    pub degenerate_fits: usize,
}

/// Options shared by every local quantile fit of a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceOptions {
    pub h: f64,
    pub order: usize,
    pub kernel: KernelSpec,
    /// A point is usable when the active kernel mass reaches
    /// `mass_floor · max_i w_i` and the fit succeeds.
    pub mass_floor: f64,
}

/// Applies [`local_poly_quantile`] at every `(x, τ)` node.
///
/// Failed or thin fits are flagged unusable; the call errors only when the
/// group is empty or no point is usable.
pub fn quantile_surface(
    sample: &Sample,
    grid: &EvalGrid,
    opts: &SurfaceOptions,
    group: Option<i64>,
) -> Result<QuantileSurface> {
    if !(opts.h > 0.0) || !opts.h.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {}", opts.h)));
    }
    if grid.x_dim() != sample.dim() {
        return Err(Error::ShapeMismatch {
            expected: sample.dim(),
            actual: grid.x_dim(),
        });
    }
    if let Some(g) = group {
        if sample.group_indices(g).is_empty() {
            return Err(Error::InvalidSample(format!("group {g} has no observations")));
        }
    }
    let floor = opts.mass_floor * sample.max_weight();
    let taus = grid.tau_axis().points();
    let per_x: Vec<Vec<Option<QuantileFit>>> = grid
        .x_points()
        .par_iter()
        .map(|pt| {
            let local = LocalDesign::build(sample, pt, opts.h, opts.order, group, &opts.kernel);
            if local.effective_mass <= 0.0 || local.effective_mass < floor {
                return vec![None; taus.len()];
            }
            taus.iter().map(|&t| local.fit(t).ok()).collect()
        })
        .collect();
    let n_x = grid.n_x();
    let mut surface = QuantileSurface {
        q_hat: vec![0.0; grid.len()],
        usable: vec![false; grid.len()],
        degenerate_fits: 0,
    };
    for (ix, fits) in per_x.into_iter().enumerate() {
        for (t, fit) in fits.into_iter().enumerate() {
            if let Some(fit) = fit {
                let flat = t * n_x + ix;
                surface.q_hat[flat] = fit.q_hat;
                surface.usable[flat] = true;
                surface.degenerate_fits += fit.degenerate as usize;
            }
        }
    }
    if !surface.usable.iter().any(|u| *u) {
        return Err(Error::EmptyUsableRegion(match group {
            Some(g) => format!("no grid point has enough local data in group {g}"),
            None => "no grid point has enough local data".into(),
        }));
    }
    Ok(surface)
}
