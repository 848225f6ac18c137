//! Convolution-as-connectivity and the two-phase layer step.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::kernel::SynapticKernel;
use crate::error::{Error, Result};
use crate::events::EventFrame;
use crate::exec::Exec;
use crate::neuron::{self, NeuronModelKind, NeuronParams, NeuronState, Step};

/// Input currents, `[population][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentMaps {
    pub populations: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl CurrentMaps {
    pub fn zeros(populations: usize, height: usize, width: usize) -> Self {
        Self {
            populations,
            height,
            width,
            data: vec![0.0; populations * height * width],
        }
    }

    #[inline]
    pub fn get(&self, n: usize, y: usize, x: usize) -> f64 {
        self.data[(n * self.height + y) * self.width + x]
    }

    pub fn plane(&self, n: usize) -> &[f64] {
        let len = self.height * self.width;
        &self.data[n * len..(n + 1) * len]
    }
}

/// Output size of a stride-1, unpadded convolution.
pub fn output_dims(frame: &EventFrame, kernel: &SynapticKernel) -> Result<(usize, usize)> {
    let k = kernel.shape();
    if frame.channels != k.channels {
        return Err(Error::Dimension(format!(
            "frame has {} channels, kernel expects {}",
            frame.channels, k.channels
        )));
    }
    if frame.height < k.height || frame.width < k.width {
        return Err(Error::Dimension(format!(
            "{}x{} kernel does not fit a {}x{} frame",
            k.height, k.width, frame.height, frame.width
        )));
    }
    Ok((frame.height - k.height + 1, frame.width - k.width + 1))
}

/// `current(n, y, x) = A * sum_{c,i,j} w[n][c][i][j] * bits[c][y+i][x+j]`.
pub fn convolve(frame: &EventFrame, kernel: &SynapticKernel, exec: Exec) -> Result<CurrentMaps> {
    let (h, w) = output_dims(frame, kernel)?;
    let mut out = CurrentMaps::zeros(kernel.shape().populations, h, w);
    convolve_into(frame, kernel, exec, &mut out)?;
    Ok(out)
}

pub fn convolve_into(
    frame: &EventFrame,
    kernel: &SynapticKernel,
    exec: Exec,
    out: &mut CurrentMaps,
) -> Result<()> {
    let (h, w) = output_dims(frame, kernel)?;
    let populations = kernel.shape().populations;
    if (out.populations, out.height, out.width) != (populations, h, w) {
        *out = CurrentMaps::zeros(populations, h, w);
    }
    let plane = h * w;
    // Scatter each active input into the outputs it reaches; frames are sparse.
    let fill = |(n, dst): (usize, &mut [f64])| {
        dst.fill(0.0);
        if frame.is_empty() {
            return;
        }
        let k = kernel.shape();
        let weights = kernel.population(n);
        for (c, y, x) in frame.active() {
            for i in 0..k.height {
                if y < i || y - i >= h {
                    continue;
                }
                let row = &mut dst[(y - i) * w..(y - i + 1) * w];
                let wrow = &weights[(c * k.height + i) * k.width..(c * k.height + i + 1) * k.width];
                for (j, &wt) in wrow.iter().enumerate() {
                    if x >= j && x - j < w {
                        row[x - j] += wt;
                    }
                }
            }
        }
        for v in dst.iter_mut() {
            *v *= frame.amplitude;
        }
    };
    match exec {
        Exec::Sequential => out.data.chunks_mut(plane).enumerate().for_each(fill),
        #[cfg(feature = "parallel")]
        Exec::Parallel => out.data.par_chunks_mut(plane).enumerate().for_each(fill),
    }
    Ok(())
}

/// Neuron parameters for a population whose firing threshold sits
/// `threshold` above rest.
///
/// Every other voltage-like quantity (theta_rh, delta_T, u_c, v_peak,
/// v_reset) keeps its position relative to the threshold, and a0 is scaled
/// inversely, so QIF/EIF trajectories stay shape-similar as the threshold
/// adapts.
pub fn scaled_params(base: &NeuronParams, threshold: f64) -> NeuronParams {
    let base_span = base.v_thresh - base.u_rest;
    let r = (threshold / base_span).max(1e-6);
    let rel = |v: f64| base.u_rest + r * (v - base.u_rest);
    NeuronParams {
        v_thresh: base.u_rest + threshold,
        theta_rh: rel(base.theta_rh),
        delta_t: r * base.delta_t,
        u_c: rel(base.u_c),
        a0: base.a0 / r,
        v_peak: rel(base.v_peak).max(base.u_rest + threshold),
        v_reset: rel(base.v_reset),
        ..*base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub populations: usize,
    pub height: usize,
    pub width: usize,
    /// `[population][y][x]`.
    pub neurons: Vec<NeuronState>,
    /// Firing threshold above rest, per population.
    pub thresholds: Vec<f64>,
    currents: CurrentMaps,
}

impl LayerState {
    pub fn new(populations: usize, height: usize, width: usize, params: &NeuronParams, threshold: f64) -> Self {
        Self {
            populations,
            height,
            width,
            neurons: vec![NeuronState::at_rest(params); populations * height * width],
            thresholds: vec![threshold; populations],
            currents: CurrentMaps::zeros(populations, height, width),
        }
    }

    /// Potentials back to rest, refractory flags cleared. Thresholds are kept.
    pub fn reset(&mut self, params: &NeuronParams) {
        self.neurons.fill(NeuronState::at_rest(params));
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.thresholds.fill(threshold);
    }

    #[inline]
    pub fn neuron(&self, n: usize, y: usize, x: usize) -> &NeuronState {
        &self.neurons[(n * self.height + y) * self.width + x]
    }

    pub fn currents(&self) -> &CurrentMaps {
        &self.currents
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpike {
    pub population: usize,
    pub y: usize,
    pub x: usize,
    pub step: Step,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinnerRecord {
    pub population: usize,
    pub y: usize,
    pub x: usize,
    pub step: Step,
    pub potential: f64,
}

/// Integrates every neuron on `frame`, then inhibits the populations that
/// fired. Spikes come back ordered by `(population, y, x)`.
pub fn step_layer(
    frame: &EventFrame,
    kernel: &SynapticKernel,
    layer: &mut LayerState,
    model: NeuronModelKind,
    params: &NeuronParams,
    now: Step,
    exec: Exec,
) -> Result<Vec<LayerSpike>> {
    let (h, w) = output_dims(frame, kernel)?;
    if (layer.populations, layer.height, layer.width) != (kernel.shape().populations, h, w) {
        return Err(Error::Dimension(format!(
            "layer is {}x{}x{}, convolution yields {}x{}x{}",
            layer.populations,
            layer.height,
            layer.width,
            kernel.shape().populations,
            h,
            w
        )));
    }
    let mut currents = std::mem::replace(&mut layer.currents, CurrentMaps::zeros(0, 0, 0));
    convolve_into(frame, kernel, exec, &mut currents)?;

    let plane = h * w;
    // Peers sit out at least the next step, even when t_ref is under two steps.
    let inhibit_until = now + params.t_ref_steps().max(2);
    let thresholds = &layer.thresholds;
    let integrate = |(n, (cells, input)): (usize, (&mut [NeuronState], &[f64]))| -> Result<Vec<LayerSpike>> {
        let p = scaled_params(params, thresholds[n]);
        let mut spikes = Vec::new();
        for (idx, (cell, &current)) in cells.iter_mut().zip(input).enumerate() {
            let out = neuron::step(model, cell, current, &p, now)?;
            cell.commit(&out);
            if out.spiked {
                spikes.push(LayerSpike {
                    population: n,
                    y: idx / w,
                    x: idx % w,
                    step: now,
                    potential: out.potential,
                });
            }
        }
        if !spikes.is_empty() {
            let mut fired = spikes.iter().map(|s| s.y * w + s.x).peekable();
            for (idx, cell) in cells.iter_mut().enumerate() {
                if fired.peek() == Some(&idx) {
                    fired.next();
                } else {
                    cell.refractory_until = cell.refractory_until.max(inhibit_until);
                }
            }
        }
        Ok(spikes)
    };

    let per_population: Result<Vec<Vec<LayerSpike>>> = match exec {
        Exec::Sequential => layer
            .neurons
            .chunks_mut(plane)
            .zip(currents.data.chunks(plane))
            .enumerate()
            .map(integrate)
            .collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => layer
            .neurons
            .par_chunks_mut(plane)
            .zip(currents.data.par_chunks(plane))
            .enumerate()
            .map(integrate)
            .collect(),
    };
    layer.currents = currents;
    Ok(per_population?.into_iter().flatten().collect())
}

/// k = 1 winner-take-all: highest potential, ties to the lowest
/// `(population, y, x)`.
pub fn select_winner(spikes: &[LayerSpike]) -> Option<WinnerRecord> {
    spikes
        .iter()
        .min_by(|a, b| {
            b.potential
                .total_cmp(&a.potential)
                .then((a.population, a.y, a.x).cmp(&(b.population, b.y, b.x)))
        })
        .map(|s| WinnerRecord {
            population: s.population,
            y: s.y,
            x: s.x,
            step: s.step,
            potential: s.potential,
        })
}
