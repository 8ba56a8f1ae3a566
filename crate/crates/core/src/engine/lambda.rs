use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which `Λ_p` aggregate to use across inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `(max_j [v_j]_+)^p`
    Max,
    /// `Σ_j [v_j]_+^p`
    #[default]
    Sum,
}

#[inline]
fn positive_part(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// `Λ_p(v)`: nonnegative, zero iff every `v_j ≤ 0`, nondecreasing in each
/// argument.
#[inline]
pub fn lambda_p(v: &[f64], p: u32, form: Form) -> f64 {
    match form {
        Form::Max => v.iter().copied().map(positive_part).fold(0.0, f64::max).powi(p as i32),
        Form::Sum => v.iter().map(|&x| positive_part(x).powi(p as i32)).sum(),
    }
}

/// `Λ_{A,p}(v) = Λ_p(v_A)`, where `v_A` zeroes the entries outside `A`.
///
/// `subset` is a bitmask over inequality indices (bit `j` for the `j`-th,
/// 0-based).
#[inline]
pub fn lambda_a_p_mask(v: &[f64], subset: u32, p: u32, form: Form) -> f64 {
    let censored = v
        .iter()
        .enumerate()
        .map(|(j, &x)| if subset & (1 << j) != 0 { positive_part(x) } else { 0.0 });
    match form {
        Form::Max => censored.fold(0.0, f64::max).powi(p as i32),
        Form::Sum => censored.map(|x| x.powi(p as i32)).sum(),
    }
}

/// `Λ_{A,p}` with `A` given as 1-based indices into `v`.
pub fn lambda_a_p(v: &[f64], subset: &[usize], p: u32, form: Form) -> Result<f64> {
    Ok(lambda_a_p_mask(v, subset_mask(subset, v.len())?, p, form))
}

/// Bitmask for a nonempty set of 1-based indices `≤ j_max`.
pub fn subset_mask(subset: &[usize], j_max: usize) -> Result<u32> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("index subset must be nonempty".into()));
    }
    let mut mask = 0u32;
    for &j in subset {
        if j == 0 || j > j_max || j > 31 {
            return Err(Error::InvalidParameter(format!(
                "index {j} outside 1..={j_max}"
            )));
        }
        mask |= 1 << (j - 1);
    }
    Ok(mask)
}
