use serde::{Deserialize, Serialize};

use crate::engine::FieldStack;
use crate::error::{Error, Result};

/// Sample contact set `B̂_A(ĉ_n)` for one nonempty `A ⊆ {1..J}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMask {
    /// 1-based inequality indices in `A`.
    pub members: Vec<usize>,
    pub mask: Vec<bool>,
}

/// All `2^J - 1` contact sets at threshold `c_hat_n`.
///
/// A usable point lies in `B̂_A` iff `|û_j| ≤ ĉ_n` for `j ∈ A` and
/// `û_j < -ĉ_n` for `j ∉ A`; the sets are therefore pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSets {
    pub c_hat_n: f64,
    /// Ordered by the bitmask of `A` (bit `j-1` for index `j`).
    pub masks: Vec<ContactMask>,
    /// Bitmask of the set containing each grid point, 0 for none.
    #[serde(skip)]
    pub(crate) membership: Vec<u32>,
}

impl ContactSets {
    /// Mask for the set with the given 1-based members.
    pub fn mask(&self, members: &[usize]) -> Option<&[bool]> {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        self.masks
            .iter()
            .find(|m| m.members == sorted)
            .map(|m| m.mask.as_slice())
    }

    /// Grid points covered by any contact set.
    pub fn covered_count(&self) -> usize {
        self.membership.iter().filter(|m| **m != 0).count()
    }

    pub fn membership(&self) -> &[u32] {
        &self.membership
    }
}

pub fn estimate_contact_sets(fields: &FieldStack, c_hat_n: f64) -> Result<ContactSets> {
    if !(c_hat_n >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "contact threshold must be nonnegative, got {c_hat_n}"
        )));
    }
    let j = fields.num_inequalities();
    if j == 0 || j > 16 {
        return Err(Error::InvalidParameter(format!(
            "number of inequalities must be in 1..=16, got {j}"
        )));
    }
    let g = fields.len();
    let mut membership = vec![0u32; g];
    for (pt, slot) in membership.iter_mut().enumerate() {
        if !fields.usable[pt] {
            continue;
        }
        let mut set = 0u32;
        let mut valid = true;
        for (k, uk) in fields.u.iter().enumerate() {
            let v = uk[pt];
            if v.abs() <= c_hat_n {
                set |= 1 << k;
            } else if !(v < -c_hat_n) {
                valid = false;
                break;
            }
        }
        if valid {
            *slot = set;
        }
    }
    let masks = (1u32..(1 << j))
        .map(|bits| ContactMask {
            members: (0..j).filter(|k| bits & (1 << k) != 0).map(|k| k + 1).collect(),
            mask: membership.iter().map(|m| *m == bits).collect(),
        })
        .collect();
    Ok(ContactSets {
        c_hat_n,
        masks,
        membership,
    })
}
