//! Single-layer spiking convolutional network trained with STDP.
//!
//! Per input frame: integrate all neurons on the convolution currents,
//! inhibit populations that fired, pick at most one winner, apply STDP to the
//! winner's kernel and recompute the adaptive threshold from the mean weight.

pub mod kernel;
pub mod layer;
pub mod stdp;
pub mod threshold;

use serde::{Deserialize, Serialize};

pub use kernel::{init_weights, KernelShape, SynapticKernel, WeightInit};
pub use layer::{convolve, scaled_params, select_winner, step_layer, CurrentMaps, LayerSpike, LayerState, WinnerRecord};
pub use stdp::{stdp_delta, stdp_update, StdpConfig};
pub use threshold::{compute_threshold, ThresholdConfig, ThresholdSettings};

use crate::error::{Error, Result};
use crate::events::EventFrame;
use crate::exec::Exec;
use crate::neuron::{NeuronModelKind, NeuronParams, Step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub populations: usize,
    pub kernel_size: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            populations: 16,
            kernel_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub model: NeuronModelKind,
    pub neuron: NeuronParams,
    pub stdp: StdpConfig,
    pub lambda: f64,
    pub architecture: Architecture,
    pub init: WeightInit,
    /// Input `(channels, height, width)`.
    pub input: (usize, usize, usize),
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate(self.model)?;
        self.stdp.validate()?;
        ThresholdConfig::new(self.lambda, &self.neuron)?;
        let a = &self.architecture;
        if a.populations == 0 || a.kernel_size == 0 {
            return Err(Error::invalid("architecture", "populations and kernel_size must be >= 1"));
        }
        let (c, h, w) = self.input;
        if c == 0 || h < a.kernel_size || w < a.kernel_size {
            return Err(Error::invalid(
                "architecture",
                format!("a {k}x{k} kernel does not fit a {c}x{h}x{w} input", k = a.kernel_size),
            ));
        }
        Ok(())
    }

    pub fn kernel_shape(&self) -> KernelShape {
        KernelShape {
            populations: self.architecture.populations,
            channels: self.input.0,
            height: self.architecture.kernel_size,
            width: self.architecture.kernel_size,
        }
    }

    pub fn output_dims(&self) -> (usize, usize) {
        let k = self.architecture.kernel_size;
        (self.input.1 - k + 1, self.input.2 - k + 1)
    }
}

/// Every spike of one sample, plus the STDP winners when learning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleResponse {
    /// In arrival order: by step, then `(population, y, x)`.
    pub spikes: Vec<LayerSpike>,
    pub winners: Vec<WinnerRecord>,
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    threshold_cfg: ThresholdConfig,
    kernel: SynapticKernel,
    layer: LayerState,
    exec: Exec,
}

impl Network {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let kernel = init_weights(
            config.kernel_shape(),
            config.init,
            config.stdp.lower_bound,
            config.stdp.upper_bound,
            seed,
        )?;
        Self::with_kernel(config, kernel)
    }

    pub fn with_kernel(config: NetworkConfig, kernel: SynapticKernel) -> Result<Self> {
        config.validate()?;
        if kernel.shape() != config.kernel_shape() {
            return Err(Error::Dimension(format!(
                "kernel {:?} does not match configured {:?}",
                kernel.shape(),
                config.kernel_shape()
            )));
        }
        let threshold_cfg = ThresholdConfig::new(config.lambda, &config.neuron)?;
        let (h, w) = config.output_dims();
        let mut net = Self {
            layer: LayerState::new(config.architecture.populations, h, w, &config.neuron, 0.0),
            threshold_cfg,
            kernel,
            config,
            exec: Exec::default(),
        };
        net.refresh_threshold();
        Ok(net)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn kernel(&self) -> &SynapticKernel {
        &self.kernel
    }

    pub fn layer(&self) -> &LayerState {
        &self.layer
    }

    /// Current adaptive threshold above rest.
    pub fn threshold(&self) -> f64 {
        self.layer.thresholds[0]
    }

    fn current_threshold(&self) -> f64 {
        let k = self.kernel.shape();
        compute_threshold(&self.threshold_cfg, self.kernel.mean(), k.width, k.height, k.channels)
    }

    fn refresh_threshold(&mut self) {
        let t = self.current_threshold();
        self.layer.set_threshold(t);
    }

    /// Presents one sample with STDP enabled. Potentials and refractory
    /// flags are reset first.
    pub fn train_sample(&mut self, frames: &[EventFrame]) -> Result<SampleResponse> {
        self.layer.reset(&self.config.neuron);
        let mut response = SampleResponse::default();
        for (t, frame) in frames.iter().enumerate() {
            let now = t as Step;
            let spikes = step_layer(
                frame,
                &self.kernel,
                &mut self.layer,
                self.config.model,
                &self.config.neuron,
                now,
                self.exec,
            )?;
            if let Some(winner) = select_winner(&spikes) {
                stdp_update(&mut self.kernel, &winner, frame, &self.config.stdp)?;
                self.refresh_threshold();
                response.winners.push(winner);
            }
            response.spikes.extend(spikes);
        }
        Ok(response)
    }

    /// Presents one sample with frozen weights, on a private layer state.
    pub fn respond(&self, frames: &[EventFrame]) -> Result<SampleResponse> {
        let mut layer = self.layer.clone();
        layer.reset(&self.config.neuron);
        let mut response = SampleResponse::default();
        for (t, frame) in frames.iter().enumerate() {
            let spikes = step_layer(
                frame,
                &self.kernel,
                &mut layer,
                self.config.model,
                &self.config.neuron,
                t as Step,
                self.exec,
            )?;
            response.spikes.extend(spikes);
        }
        Ok(response)
    }
}
