use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub n_configs: usize,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: u32,
    pub n_configs: usize,
    pub rungs: Vec<Rung>,
}

/// Largest `s` with `eta^s <= r`.
fn floor_log(r: u64, eta: u64) -> u32 {
    let mut s = 0;
    let mut p = eta;
    while p <= r {
        s += 1;
        match p.checked_mul(eta) {
            Some(next) => p = next,
            None => break,
        }
    }
    s
}

/// Standard Hyperband brackets for maximum budget `max_budget` and
/// reduction factor `eta`, most exploratory bracket first.
///
/// Bracket `s` starts `ceil((s_max + 1) / (s + 1) * eta^s)` configurations at
/// budget `R * eta^-s`; rung `i` keeps `floor(n * eta^-i)` of them at
/// `R * eta^(i - s)`. Budgets are rounded to whole samples (at least 1).
pub fn hyperband_schedule(max_budget: u64, eta: u64) -> Result<Vec<Bracket>> {
    if eta < 2 {
        return Err(Error::invalid("eta", "must be >= 2"));
    }
    if max_budget == 0 {
        return Err(Error::invalid("max_budget", "must be >= 1"));
    }
    if max_budget > 1 && max_budget < eta {
        return Err(Error::invalid("max_budget", "must be >= eta (or exactly 1)"));
    }
    let s_max = floor_log(max_budget, eta);
    let r = max_budget as f64;
    let e = eta as f64;
    Ok((0..=s_max)
        .rev()
        .map(|s| {
            let eta_s = eta.pow(s) as u128;
            let n = ((s_max as u128 + 1) * eta_s).div_ceil(s as u128 + 1) as usize;
            let rungs = (0..=s)
                .map(|i| Rung {
                    n_configs: n / eta.pow(i) as usize,
                    budget: if i == s {
                        max_budget
                    } else {
                        ((r / e.powi((s - i) as i32)).round() as u64).max(1)
                    },
                })
                .collect();
            Bracket { s, n_configs: n, rungs }
        })
        .collect())
}
