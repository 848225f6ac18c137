use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"IFSNNKRN";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelShape {
    pub populations: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl KernelShape {
    pub fn population_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.populations * self.population_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Convolution weights, `[population][channel][row][col]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapticKernel {
    shape: KernelShape,
    weights: Vec<f64>,
}

impl SynapticKernel {
    pub fn from_weights(shape: KernelShape, weights: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Dimension("kernel shape has a zero dimension".into()));
        }
        if weights.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "kernel {shape:?} needs {} weights, got {}",
                shape.len(),
                weights.len()
            )));
        }
        Ok(Self { shape, weights })
    }

    pub fn uniform(shape: KernelShape, value: f64) -> Result<Self> {
        Self::from_weights(shape, vec![value; shape.len()])
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, i: usize, j: usize) -> usize {
        ((n * self.shape.channels + c) * self.shape.height + i) * self.shape.width + j
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, i: usize, j: usize) -> f64 {
        self.weights[self.index(n, c, i, j)]
    }

    pub fn population(&self, n: usize) -> &[f64] {
        let len = self.shape.population_len();
        &self.weights[n * len..(n + 1) * len]
    }

    pub fn population_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.shape.population_len();
        &mut self.weights[n * len..(n + 1) * len]
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for d in [
            self.shape.populations,
            self.shape.channels,
            self.shape.height,
            self.shape.width,
        ] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + 8 * self.weights.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a kernel checkpoint".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(8);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let shape = KernelShape {
            populations: word(12) as usize,
            channels: word(16) as usize,
            height: word(20) as usize,
            width: word(24) as usize,
        };
        let body = &bytes[28..];
        if body.len() != shape.len() * 8 {
            return Err(Error::Checkpoint(format!(
                "shape {shape:?} needs {} weight bytes, found {}",
                shape.len() * 8,
                body.len()
            )));
        }
        let weights = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_weights(shape, weights)
    }
}

/// Normal initialization of the kernel weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightInit {
    pub mean: f64,
    pub std: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        Self {
            mean: 0.8,
            std: 0.05,
        }
    }
}

/// Draws `N(mean, std)` weights clamped strictly inside `(lower, upper)`.
pub fn init_weights(
    shape: KernelShape,
    init: WeightInit,
    lower: f64,
    upper: f64,
    seed: u64,
) -> Result<SynapticKernel> {
    if !(lower < upper) {
        return Err(Error::invalid("bounds", "lower bound must be below upper bound"));
    }
    if !(init.std >= 0.0 && init.std.is_finite() && init.mean.is_finite()) {
        return Err(Error::invalid("init", "mean must be finite and std >= 0"));
    }
    let normal = Normal::new(init.mean, init.std).map_err(|e| Error::invalid("init", e.to_string()))?;
    let eps = 1e-6 * (upper - lower);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..shape.len())
        .map(|_| normal.sample(&mut rng).clamp(lower + eps, upper - eps))
        .collect();
    SynapticKernel::from_weights(shape, weights)
}
