use serde::{Deserialize, Serialize};

use super::kernel::SynapticKernel;
use super::layer::WinnerRecord;
use crate::error::{Error, Result};
use crate::events::EventFrame;

/// Bounded multiplicative STDP:
///
/// ```text
/// dW = a_plus  (W - LB)(UB - W)   input at the aligned location fired (LTP)
/// dW = a_minus (W - LB)(UB - W)   otherwise (LTD)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StdpConfig {
    pub a_plus: f64,
    pub a_minus: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl Default for StdpConfig {
    fn default() -> Self {
        Self {
            a_plus: 0.05,
            a_minus: -0.015,
            lower_bound: 0.0,
            upper_bound: 1.0,
        }
    }
}

impl StdpConfig {
    pub fn validate(&self) -> Result<()> {
        let (lb, ub) = (self.lower_bound, self.upper_bound);
        if !(lb.is_finite() && ub.is_finite() && lb < ub) {
            return Err(Error::invalid("stdp bounds", "need finite lower_bound < upper_bound"));
        }
        if !(self.a_plus > 0.0 && self.a_plus.is_finite()) {
            return Err(Error::invalid("a_plus", "must be > 0"));
        }
        if !(self.a_minus < 0.0 && self.a_minus.is_finite()) {
            return Err(Error::invalid("a_minus", "must be < 0"));
        }
        // |a| (UB - LB) < 1 keeps every update inside the bounds.
        let span = ub - lb;
        if self.a_plus * span >= 1.0 {
            return Err(Error::invalid("a_plus", "a_plus * (UB - LB) must be < 1"));
        }
        if -self.a_minus * span >= 1.0 {
            return Err(Error::invalid("a_minus", "|a_minus| * (UB - LB) must be < 1"));
        }
        Ok(())
    }
}

#[inline]
pub fn stdp_delta(w: f64, potentiate: bool, cfg: &StdpConfig) -> f64 {
    let scale = if potentiate { cfg.a_plus } else { cfg.a_minus };
    scale * (w - cfg.lower_bound) * (cfg.upper_bound - w)
}

/// Applies one update to `w` and keeps the result strictly inside the bounds.
#[inline]
pub fn stdp_apply(w: f64, potentiate: bool, cfg: &StdpConfig) -> f64 {
    let updated = w + stdp_delta(w, potentiate, cfg);
    if w > cfg.lower_bound && w < cfg.upper_bound {
        // Rounding of `w + dW` can land on a bound when w is within an ulp of it.
        updated.clamp(cfg.lower_bound.next_up(), cfg.upper_bound.next_down())
    } else {
        updated
    }
}

/// Updates the winner's kernel from the input frame at the winner's step.
pub fn stdp_update(
    kernel: &mut SynapticKernel,
    winner: &WinnerRecord,
    frame: &EventFrame,
    cfg: &StdpConfig,
) -> Result<()> {
    let shape = kernel.shape();
    if winner.population >= shape.populations {
        return Err(Error::Dimension(format!(
            "winner population {} out of {}",
            winner.population, shape.populations
        )));
    }
    if frame.channels != shape.channels
        || winner.y + shape.height > frame.height
        || winner.x + shape.width > frame.width
    {
        return Err(Error::Dimension(format!(
            "winner at ({}, {}) with a {}x{} kernel does not fit a {}x{}x{} frame",
            winner.y, winner.x, shape.height, shape.width, frame.channels, frame.height, frame.width
        )));
    }
    let (y0, x0) = (winner.y, winner.x);
    let weights = kernel.population_mut(winner.population);
    let mut idx = 0;
    for c in 0..shape.channels {
        for i in 0..shape.height {
            for j in 0..shape.width {
                let fired = frame.get(c, y0 + i, x0 + j);
                weights[idx] = stdp_apply(weights[idx], fired, cfg);
                idx += 1;
            }
        }
    }
    Ok(())
}
