//! Exact minimisation of a weighted check-loss sum
//! `Σ_i w_i l_τ(y_i - c_iᵀγ)` over `γ ∈ R^p`.
//!
//! The objective is convex and piecewise linear, so a minimiser is attained
//! at a vertex where `p` linearly independent residuals vanish. The solver
//! walks between such vertices: at the current vertex it evaluates the
//! one-sided slope along every edge (the lines cut out by `p - 1` of the
//! zero-residual constraints), leaves along the steepest descending edge and
//! stops at the kink where the slope along that edge turns nonnegative. Every
//! step strictly lowers the objective, so the walk terminates; with no
//! descending edge left the vertex is optimal. Degenerate vertices (more than
//! `p` zero residuals) are handled by enumerating all edge subsets, which the
//! steepest-edge test needs to be exact there.
//!
//! When the optimum is not unique, the optimal face is explored through its
//! zero-slope edges and the lexicographically smallest vertex is returned.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};

const MAX_ITERATIONS: usize = 10_000;
const MAX_FACE_VERTICES: usize = 64;
const MAX_EDGE_SUBSETS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QrSolution {
    pub gamma: Vec<f64>,
    pub objective: f64,
    /// The optimum is not unique or sits on a degenerate vertex.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QrFailure {
    /// Fewer than `p` positive-weight rows, or a rank-deficient design.
    RankDeficient,
    /// The walk failed to terminate (should not happen in exact arithmetic).
    IterationLimit,
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Rows with identical `(y, c)` merged, weights summed; zero weights dropped.
struct Problem {
    design: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    p: usize,
    tau: f64,
    tol_residual: f64,
    tol_slope: f64,
}

impl Problem {
    fn new(design: &[f64], y: &[f64], w: &[f64], p: usize, tau: f64) -> Self {
        let row = |i: usize| &design[i * p..(i + 1) * p];
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| w[i] > 0.0).collect();
        idx.sort_by(|&a, &b| {
            y[a].total_cmp(&y[b]).then_with(|| {
                row(a)
                    .iter()
                    .zip(row(b))
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut out_d = Vec::with_capacity(idx.len() * p);
        let mut out_y: Vec<f64> = Vec::with_capacity(idx.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(idx.len());
        for &i in &idx {
            let m = out_y.len();
            if m > 0 && out_y[m - 1] == y[i] && &out_d[(m - 1) * p..m * p] == row(i) {
                out_w[m - 1] += w[i];
            } else {
                out_d.extend_from_slice(row(i));
                out_y.push(y[i]);
                out_w.push(w[i]);
            }
        }
        let y_scale = out_y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let slope_scale: f64 = (0..out_y.len())
            .map(|i| out_w[i] * out_d[i * p..(i + 1) * p].iter().map(|c| c * c).sum::<f64>().sqrt())
            .sum();
        Self {
            design: out_d,
            y: out_y,
            w: out_w,
            p,
            tau,
            tol_residual: 1e-9 * (1.0 + y_scale),
            tol_slope: 1e-10 * slope_scale.max(f64::MIN_POSITIVE),
        }
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.p..(i + 1) * self.p]
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn objective(&self, gamma: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.w[i] * rho(self.y[i] - self.dot(i, gamma), self.tau))
            .sum()
    }

    /// Coefficients interpolating the rows in `basis`.
    fn interpolate(&self, basis: &[usize]) -> Option<Vec<f64>> {
        let p = self.p;
        let m = DMatrix::from_fn(p, p, |r, c| self.row(basis[r])[c]);
        let scale: f64 = basis
            .iter()
            .map(|&i| self.row(i).iter().map(|c| c * c).sum::<f64>().sqrt())
            .product();
        let lu = m.lu();
        if lu.determinant().abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        let rhs = DVector::from_fn(p, |r, _| self.y[basis[r]]);
        lu.solve(&rhs).map(|v| v.iter().copied().collect())
    }

    /// Unit vector orthogonal to the rows in `subset` (`p - 1` of them), or
    /// `None` when those rows are dependent.
    fn edge_direction(&self, subset: &[usize]) -> Option<Vec<f64>> {
        let p = self.p;
        if p == 1 {
            return Some(vec![1.0]);
        }
        let scale: f64 = subset
            .iter()
            .map(|&i| self.row(i).iter().map(|c| c * c).sum::<f64>().sqrt())
            .product::<f64>()
            .max(f64::MIN_POSITIVE);
        let mut best: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
        for k in 0..p {
            let m = DMatrix::from_fn(p, p, |r, c| {
                if r + 1 < p {
                    self.row(subset[r])[c]
                } else if c == k {
                    1.0
                } else {
                    0.0
                }
            });
            let lu = m.lu();
            let det = lu.determinant().abs();
            if best.as_ref().is_none_or(|(b, _)| det > *b) {
                best = Some((det, lu));
            }
        }
        let (det, lu) = best?;
        if det <= 1e-12 * scale {
            return None;
        }
        let mut e = DVector::zeros(p);
        e[p - 1] = 1.0;
        let d = lu.solve(&e)?;
        let norm = d.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        Some(d.iter().map(|v| v / norm).collect())
    }

    fn residuals(&self, gamma: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.y[i] - self.dot(i, gamma)).collect()
    }

    /// Right derivative of the objective along `d`; `zero[i]` marks rows
    /// whose residual is treated as exactly zero.
    fn right_slope(&self, d: &[f64], r: &[f64], zero: &[bool]) -> f64 {
        let tau = self.tau;
        let mut slope = 0.0;
        for i in 0..self.len() {
            let g = self.dot(i, d);
            if g == 0.0 {
                continue;
            }
            slope += self.w[i]
                * if zero[i] {
                    if g > 0.0 {
                        g * (1.0 - tau)
                    } else {
                        -g * tau
                    }
                } else if r[i] > 0.0 {
                    -g * tau
                } else {
                    g * (1.0 - tau)
                };
        }
        slope
    }

    /// Kinks hit when moving along `d` from the current vertex, sorted.
    fn breakpoints(&self, d: &[f64], r: &[f64], zero: &[bool]) -> Vec<(f64, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            if zero[i] {
                continue;
            }
            let g = self.dot(i, d);
            if g == 0.0 {
                continue;
            }
            let t = r[i] / g;
            if t > 0.0 {
                out.push((t, i, self.w[i] * g.abs()));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    fn zero_set(&self, basis: &[usize], r: &[f64]) -> (Vec<usize>, Vec<bool>) {
        let mut zero = vec![false; self.len()];
        for &b in basis {
            zero[b] = true;
        }
        for (i, ri) in r.iter().enumerate() {
            if ri.abs() <= self.tol_residual {
                zero[i] = true;
            }
        }
        let members = (0..self.len()).filter(|&i| zero[i]).collect();
        (members, zero)
    }

    /// `(p - 1)`-subsets of the zero set spanning candidate edges.
    fn edge_subsets(&self, basis: &[usize], zero_members: &[usize]) -> Vec<Vec<usize>> {
        let k = self.p - 1;
        if zero_members.len() == self.p || binomial(zero_members.len(), k) > MAX_EDGE_SUBSETS {
            return (0..self.p)
                .map(|drop| {
                    basis
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != drop)
                        .map(|(_, &i)| i)
                        .collect()
                })
                .collect();
        }
        combinations(zero_members, k)
    }

    fn initial_basis(&self) -> Option<Vec<usize>> {
        // greedy selection of independent rows by Gram-Schmidt
        let p = self.p;
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut basis = Vec::with_capacity(p);
        for i in 0..self.len() {
            let row = self.row(i);
            let norm0 = row.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                continue;
            }
            let mut v = row.to_vec();
            for q in &ortho {
                let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vj, qj) in v.iter_mut().zip(q) {
                    *vj -= proj * qj;
                }
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-10 * norm0 {
                ortho.push(v.iter().map(|c| c / norm).collect());
                basis.push(i);
                if basis.len() == p {
                    return Some(basis);
                }
            }
        }
        None
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: usize = 1;
    for j in 0..k {
        acc = acc.saturating_mul(n - j) / (j + 1);
    }
    acc
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for j in start..items.len() {
            current.push(items[j]);
            rec(items, k, j + 1, current, out);
            current.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Minimises `Σ_i w_i l_τ(y_i - c_iᵀγ)` where row `i` of the row-major
/// `design` (`p` columns) is `c_i`.
pub(crate) fn minimize_check_loss(
    design: &[f64],
    y: &[f64],
    w: &[f64],
    p: usize,
    tau: f64,
) -> Result<QrSolution, QrFailure> {
    debug_assert_eq!(design.len(), y.len() * p);
    let prob = Problem::new(design, y, w, p, tau);
    if prob.len() < p {
        return Err(QrFailure::RankDeficient);
    }
    let mut basis = prob.initial_basis().ok_or(QrFailure::RankDeficient)?;
    let mut gamma = prob.interpolate(&basis).ok_or(QrFailure::RankDeficient)?;
    let mut objective = prob.objective(&gamma);
    let mut degenerate = false;

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let r = prob.residuals(&gamma);
        let (members, zero) = prob.zero_set(&basis, &r);
        if members.len() > p {
            degenerate = true;
        }
        let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
        for subset in prob.edge_subsets(&basis, &members) {
            let Some(d) = prob.edge_direction(&subset) else {
                continue;
            };
            for sign in [1.0, -1.0] {
                let dd: Vec<f64> = d.iter().map(|v| sign * v).collect();
                let slope = prob.right_slope(&dd, &r, &zero);
                if best.as_ref().is_none_or(|(s, _, _)| slope < *s) {
                    best = Some((slope, subset.clone(), dd));
                }
            }
        }
        let Some((slope, subset, d)) = best else {
            return Err(QrFailure::RankDeficient);
        };
        if slope >= -prob.tol_slope {
            converged = true;
            break;
        }
        let mut running = slope;
        let mut entering = None;
        for (_, i, jump) in prob.breakpoints(&d, &r, &zero) {
            running += jump;
            if running >= -prob.tol_slope {
                entering = Some(i);
                break;
            }
        }
        let Some(entering) = entering else {
            // bounded below, so this only happens through rounding
            converged = true;
            break;
        };
        let mut next_basis = subset;
        next_basis.push(entering);
        let Some(next_gamma) = prob.interpolate(&next_basis) else {
            converged = true;
            degenerate = true;
            break;
        };
        let next_objective = prob.objective(&next_gamma);
        if next_objective >= objective {
            // no exact progress: treat as optimal up to rounding
            converged = true;
            degenerate = true;
            break;
        }
        basis = next_basis;
        gamma = next_gamma;
        objective = next_objective;
    }
    if !converged {
        return Err(QrFailure::IterationLimit);
    }

    // explore the optimal face for the lexicographically smallest vertex
    let key = |b: &[usize]| b.iter().copied().collect::<BTreeSet<_>>();
    let mut visited = BTreeSet::new();
    visited.insert(key(&basis));
    let mut queue = VecDeque::from([(basis.clone(), gamma.clone())]);
    let mut best_gamma = gamma.clone();
    while let Some((b, g)) = queue.pop_front() {
        let r = prob.residuals(&g);
        let (members, zero) = prob.zero_set(&b, &r);
        if members.len() > p {
            degenerate = true;
        }
        for subset in prob.edge_subsets(&b, &members) {
            let Some(d) = prob.edge_direction(&subset) else {
                continue;
            };
            for sign in [1.0, -1.0] {
                let dd: Vec<f64> = d.iter().map(|v| sign * v).collect();
                let slope = prob.right_slope(&dd, &r, &zero);
                if slope.abs() > prob.tol_slope {
                    continue;
                }
                degenerate = true;
                let Some(&(_, entering, _)) = prob.breakpoints(&dd, &r, &zero).first() else {
                    continue;
                };
                let mut nb = subset.clone();
                nb.push(entering);
                if visited.len() >= MAX_FACE_VERTICES || !visited.insert(key(&nb)) {
                    continue;
                }
                let Some(ng) = prob.interpolate(&nb) else {
                    continue;
                };
                if prob.objective(&ng) > objective + prob.tol_slope {
                    continue;
                }
                if lex_less(&ng, &best_gamma) {
                    best_gamma = ng.clone();
                }
                queue.push_back((nb, ng));
            }
        }
    }
    let objective = prob.objective(&best_gamma);
    Ok(QrSolution {
        gamma: best_gamma,
        objective,
        degenerate,
    })
}
