use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::NeuronParams;

/// Inputs to the homeostatic threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub lambda: f64,
    /// Spike amplitude `A`, normally `1 / t_s`.
    pub amplitude: f64,
    pub capacitance: f64,
    pub t_s: f64,
}

impl ThresholdConfig {
    pub fn new(lambda: f64, params: &NeuronParams) -> Result<Self> {
        let cfg = Self {
            lambda,
            amplitude: 1.0 / params.t_s,
            capacitance: params.capacitance(),
            t_s: params.t_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda", "must lie in [0, 1]"));
        }
        if !(self.amplitude > 0.0 && self.capacitance > 0.0 && self.t_s > 0.0) {
            return Err(Error::invalid("threshold", "amplitude, capacitance and t_s must be > 0"));
        }
        Ok(())
    }
}

/// Serialized form: only `lambda` is free, the rest follows from the neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSettings {
    pub lambda: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self { lambda: 0.85 }
    }
}

/// `lambda * A * (t_s / C) * mean_weight * (W_k * H_k * N_c)`: the fraction
/// `lambda` of the potential a fully dense input would deposit in one step.
pub fn compute_threshold(
    cfg: &ThresholdConfig,
    mean_weight: f64,
    kernel_width: usize,
    kernel_height: usize,
    channels: usize,
) -> f64 {
    let fan_in = (kernel_width * kernel_height * channels) as f64;
    cfg.lambda * cfg.amplitude * (cfg.t_s / cfg.capacitance) * mean_weight * fan_in
}
