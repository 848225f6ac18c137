//! Single-variable integrate-and-fire neurons (LIF, QIF, EIF).
//!
//! Every model is integrated with forward Euler at a fixed step `t_s`:
//!
//! ```text
//! u <- u + (t_s / tau_m) * drive(u, I)
//! ```
//!
//! where `drive` is the right-hand side of `tau_m du/dt`:
//!
//! * LIF: `-(u - u_rest) + R I`
//! * EIF: `-(u - u_rest) + delta_T exp((u - theta_rh) / delta_T) + R I`
//! * QIF: `a0 (u - u_c)(u - u_rest) + R I`
//!
//! LIF fires when `u >= v_thresh`. QIF and EIF diverge in finite time, so the
//! potential is capped at `v_peak` and reaching the cap is the spike.
//!
//! Time is counted in integer steps; milliseconds only appear in
//! [`NeuronParams`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper clamp for the EIF exponent argument `(u - theta_rh) / delta_T`.
pub const EIF_EXP_ARG_CAP: f64 = 50.0;

/// Relative slack on the spike comparison, so a potential that reaches the
/// level up to floating-point round-off still fires.
pub const SPIKE_ROUNDOFF: f64 = 1e-12;

/// Simulation time in integer steps of `t_s`.
pub type Step = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronModelKind {
    Lif,
    Qif,
    Eif,
}

impl NeuronModelKind {
    pub const ALL: [NeuronModelKind; 3] = [Self::Lif, Self::Qif, Self::Eif];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lif => "lif",
            Self::Qif => "qif",
            Self::Eif => "eif",
        }
    }

    /// Potential at or above which the model emits a spike.
    pub fn spike_level(self, params: &NeuronParams) -> f64 {
        match self {
            Self::Lif => params.v_thresh,
            Self::Qif | Self::Eif => params.v_peak,
        }
    }
}

impl fmt::Display for NeuronModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NeuronModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lif" => Ok(Self::Lif),
            "qif" => Ok(Self::Qif),
            "eif" => Ok(Self::Eif),
            other => Err(Error::invalid(
                "model",
                format!("unknown neuron model `{other}` (expected lif, qif or eif)"),
            )),
        }
    }
}

/// Parameters shared by the three models. Times are in milliseconds.
///
/// The capacitance is not stored: it is always `tau_m / resistance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    pub tau_m: f64,
    pub u_rest: f64,
    pub resistance: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
    pub t_ref: f64,
    pub t_s: f64,
    /// EIF sharpness.
    pub delta_t: f64,
    /// EIF rheobase threshold.
    pub theta_rh: f64,
    /// QIF curvature.
    pub a0: f64,
    /// QIF cut-off (unstable fixed point).
    pub u_c: f64,
    /// Numerical divergence cap for QIF/EIF.
    pub v_peak: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        let v_thresh = 10.0;
        Self {
            tau_m: 10.0,
            u_rest: 0.0,
            resistance: 1.0,
            v_thresh,
            v_reset: 0.0,
            t_ref: 2.0,
            t_s: 1.0,
            delta_t: 2.0,
            theta_rh: 0.7 * v_thresh,
            a0: 0.1,
            u_c: 0.5 * v_thresh,
            v_peak: v_thresh + 10.0,
        }
    }
}

impl NeuronParams {
    pub fn capacitance(&self) -> f64 {
        self.tau_m / self.resistance
    }

    /// Refractory period expressed in whole steps.
    pub fn t_ref_steps(&self) -> Step {
        (self.t_ref / self.t_s).round() as Step
    }

    pub fn validate(&self, model: NeuronModelKind) -> Result<()> {
        let finite = [
            ("tau_m", self.tau_m),
            ("u_rest", self.u_rest),
            ("resistance", self.resistance),
            ("v_thresh", self.v_thresh),
            ("v_reset", self.v_reset),
            ("t_ref", self.t_ref),
            ("t_s", self.t_s),
            ("delta_t", self.delta_t),
            ("theta_rh", self.theta_rh),
            ("a0", self.a0),
            ("u_c", self.u_c),
            ("v_peak", self.v_peak),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.tau_m <= 0.0 {
            return Err(Error::invalid("tau_m", "must be > 0"));
        }
        if self.resistance <= 0.0 {
            return Err(Error::invalid("resistance", "must be > 0"));
        }
        if self.t_s <= 0.0 {
            return Err(Error::invalid("t_s", "must be > 0"));
        }
        if self.t_ref < 0.0 {
            return Err(Error::invalid("t_ref", "must be >= 0"));
        }
        if self.v_thresh <= self.u_rest {
            return Err(Error::invalid("v_thresh", "must be above u_rest"));
        }
        if self.v_peak < self.v_thresh {
            return Err(Error::invalid("v_peak", "must be >= v_thresh"));
        }
        match model {
            NeuronModelKind::Lif => {}
            NeuronModelKind::Eif => {
                if self.delta_t <= 0.0 {
                    return Err(Error::invalid("delta_t", "must be > 0 for EIF"));
                }
            }
            NeuronModelKind::Qif => {
                if self.a0 <= 0.0 {
                    return Err(Error::invalid("a0", "must be > 0 for QIF"));
                }
                if self.u_c <= self.u_rest {
                    return Err(Error::invalid("u_c", "must be above u_rest for QIF"));
                }
            }
        }
        if self.t_s > self.tau_m {
            log::warn!(
                "t_s = {} ms exceeds tau_m = {} ms; forward Euler may be unstable",
                self.t_s,
                self.tau_m
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub u: f64,
    /// First step at which the neuron integrates again.
    pub refractory_until: Step,
    pub last_spike: Option<Step>,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        Self::with_potential(params.u_rest)
    }

    pub fn with_potential(u: f64) -> Self {
        Self {
            u,
            refractory_until: 0,
            last_spike: None,
        }
    }

    pub fn is_refractory(&self, now: Step) -> bool {
        now < self.refractory_until
    }

    pub fn commit(&mut self, outcome: &StepOutcome) {
        self.u = outcome.new_u;
        self.refractory_until = outcome.refractory_until;
        if outcome.spiked {
            self.last_spike = outcome.spike_time;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub new_u: f64,
    pub spiked: bool,
    pub spike_time: Option<Step>,
    /// Potential reached by the step before any reset. On a QIF/EIF spike
    /// this is the uncapped Euler value, so stronger upswings rank higher.
    pub potential: f64,
    pub refractory_until: Step,
}

impl StepOutcome {
    fn hold(state: &NeuronState) -> Self {
        Self {
            new_u: state.u,
            spiked: false,
            spike_time: None,
            potential: state.u,
            refractory_until: state.refractory_until,
        }
    }
}

/// Right-hand side of `tau_m du/dt` for the given model.
#[inline]
pub fn drive(model: NeuronModelKind, params: &NeuronParams, u: f64, current: f64) -> f64 {
    let input = params.resistance * current;
    match model {
        NeuronModelKind::Lif => -(u - params.u_rest) + input,
        NeuronModelKind::Eif => {
            let arg = ((u - params.theta_rh) / params.delta_t).min(EIF_EXP_ARG_CAP);
            -(u - params.u_rest) + params.delta_t * arg.exp() + input
        }
        NeuronModelKind::Qif => params.a0 * (u - params.u_c) * (u - params.u_rest) + input,
    }
}

/// One Euler step for any model. Pure: the state is not modified.
#[inline]
pub fn step(
    model: NeuronModelKind,
    state: &NeuronState,
    current: f64,
    params: &NeuronParams,
    now: Step,
) -> Result<StepOutcome> {
    if !current.is_finite() {
        return Err(Error::NonFiniteCurrent(current));
    }
    if state.is_refractory(now) {
        return Ok(StepOutcome::hold(state));
    }

    let raw = state.u + (params.t_s / params.tau_m) * drive(model, params, state.u, current);
    let u = match model {
        NeuronModelKind::Lif => raw,
        // +inf from an overflowing upswing is still a spike.
        _ => raw.min(params.v_peak),
    };
    if !u.is_finite() {
        return Err(Error::NonFinitePotential {
            u: state.u,
            current,
        });
    }

    let level = model.spike_level(params);
    if u >= level - SPIKE_ROUNDOFF * level.abs().max(1.0) {
        Ok(StepOutcome {
            new_u: params.v_reset,
            spiked: true,
            spike_time: Some(now),
            potential: raw.min(f64::MAX),
            refractory_until: now + params.t_ref_steps(),
        })
    } else {
        Ok(StepOutcome {
            new_u: u,
            spiked: false,
            spike_time: None,
            potential: u,
            refractory_until: state.refractory_until,
        })
    }
}

pub fn lif_step(
    state: &NeuronState,
    current: f64,
    params: &NeuronParams,
    now: Step,
) -> Result<StepOutcome> {
    step(NeuronModelKind::Lif, state, current, params, now)
}

pub fn eif_step(
    state: &NeuronState,
    current: f64,
    params: &NeuronParams,
    now: Step,
) -> Result<StepOutcome> {
    step(NeuronModelKind::Eif, state, current, params, now)
}

pub fn qif_step(
    state: &NeuronState,
    current: f64,
    params: &NeuronParams,
    now: Step,
) -> Result<StepOutcome> {
    step(NeuronModelKind::Qif, state, current, params, now)
}

/// Samples `du/dt = drive(u, I) / tau_m` uniformly on `[u_min, u_max]`.
pub fn phase_curve(
    model: NeuronModelKind,
    params: &NeuronParams,
    u_min: f64,
    u_max: f64,
    n_points: usize,
    current: f64,
) -> Result<Vec<(f64, f64)>> {
    params.validate(model)?;
    if !(u_min.is_finite() && u_max.is_finite()) || u_min >= u_max {
        return Err(Error::invalid("u_min/u_max", "need finite u_min < u_max"));
    }
    if n_points < 2 {
        return Err(Error::invalid("n_points", "need at least 2 points"));
    }
    if !current.is_finite() {
        return Err(Error::NonFiniteCurrent(current));
    }
    let span = u_max - u_min;
    let last = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let u = if i == n_points - 1 {
                u_max
            } else {
                u_min + span * (i as f64) / last
            };
            (u, drive(model, params, u, current) / params.tau_m)
        })
        .collect())
}

/// Roots of the drive on `[u_min, u_max]`, located on an `n_points` grid and
/// refined by bisection.
pub fn fixed_points(
    model: NeuronModelKind,
    params: &NeuronParams,
    u_min: f64,
    u_max: f64,
    n_points: usize,
    current: f64,
) -> Result<Vec<f64>> {
    let curve = phase_curve(model, params, u_min, u_max, n_points, current)?;
    let f = |u: f64| drive(model, params, u, current);
    let mut roots: Vec<f64> = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        if roots.last().is_none_or(|&last| (r - last).abs() > 1e-12) {
            roots.push(r);
        }
    };
    for w in curve.windows(2) {
        let (a, fa) = w[0];
        let (b, fb) = w[1];
        if fa == 0.0 {
            push(a, &mut roots);
            continue;
        }
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        let lo_sign = f(lo).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = f(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        push(0.5 * (lo + hi), &mut roots);
    }
    if let Some(&(u, fu)) = curve.last() {
        if fu == 0.0 {
            push(u, &mut roots);
        }
    }
    Ok(roots)
}
