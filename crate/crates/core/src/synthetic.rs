//! Synthetic two-class event streams for smoke tests and toy runs.
//!
//! Class 0 is a horizontal bar, class 1 a vertical one, so both classes emit
//! the same number of events on average. The bar is swept along three
//! straight movements (like the saccades of a re-recorded image dataset) and
//! each of its pixels emits events at random while it moves, on top of
//! sparse background noise.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{encode_nmnist, write_text_events, EventRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: u32,
    pub height: u32,
    /// Length of each of the three movements.
    pub saccade_ms: u64,
    /// Probability that a glyph pixel fires in a given millisecond.
    pub rate: f64,
    /// Background events per millisecond over the whole sensor.
    pub noise: f64,
    /// Maximum random offset of the glyph centre, in pixels.
    pub jitter: i32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 34,
            height: 34,
            saccade_ms: 30,
            rate: 0.2,
            noise: 0.5,
            jitter: 2,
        }
    }
}

/// Displacement at the end of each movement, relative to the start.
const PATH: [(f64, f64); 4] = [(0.0, 0.0), (2.0, 2.0), (4.0, 0.0), (0.0, 0.0)];

fn glyph(class: usize, cx: i32, cy: i32, size: i32) -> Vec<(i32, i32)> {
    let mut px = Vec::new();
    for dy in -size..=size {
        for dx in -size..=size {
            let on = match class {
                0 => dy.abs() <= 1,
                _ => dx.abs() <= 1,
            };
            if on {
                px.push((cx + dx, cy + dy));
            }
        }
    }
    px
}

/// One sample of `class` (0 = horizontal, otherwise vertical), sorted by timestamp.
pub fn sample(class: usize, spec: &SyntheticSpec, seed: u64) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width as i32, spec.height as i32);
    let size = (w.min(h) / 4).max(2);
    let j = spec.jitter.max(0);
    let cx = w / 2 - 2 + rng.random_range(-j..=j);
    let cy = h / 2 - 1 + rng.random_range(-j..=j);
    let shape = glyph(class, cx, cy, size);
    let total_ms = 3 * spec.saccade_ms;
    let mut events = Vec::new();
    for ms in 0..total_ms {
        let leg = (ms / spec.saccade_ms.max(1)) as usize;
        let f = (ms % spec.saccade_ms.max(1)) as f64 / spec.saccade_ms.max(1) as f64;
        let (x0, y0) = PATH[leg];
        let (x1, y1) = PATH[leg + 1];
        let ox = (x0 + f * (x1 - x0)).round() as i32;
        let oy = (y0 + f * (y1 - y0)).round() as i32;
        for &(x, y) in &shape {
            let (x, y) = (x + ox, y + oy);
            if (0..w).contains(&x) && (0..h).contains(&y) && rng.random::<f64>() < spec.rate {
                let t = ms * 1000 + rng.random_range(0..1000);
                events.push(EventRecord::new(x as u32, y as u32, rng.random(), t));
            }
        }
        let mut budget = spec.noise;
        while budget > 0.0 {
            if rng.random::<f64>() < budget.min(1.0) {
                let t = ms * 1000 + rng.random_range(0..1000);
                events.push(EventRecord::new(
                    rng.random_range(0..spec.width),
                    rng.random_range(0..spec.height),
                    rng.random(),
                    t,
                ));
            }
            budget -= 1.0;
        }
    }
    events.sort_by_key(|e| e.timestamp_us);
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticFormat {
    /// `{Train,Test}/<class>/*.bin`
    Nmnist,
    /// `{train,test}/<class>/*.txt`
    Text,
}

/// Writes a two-class dataset (class ids 0 and 1) under `root`.
pub fn write_dataset(
    root: &Path,
    format: SyntheticFormat,
    spec: &SyntheticSpec,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<()> {
    if format == SyntheticFormat::Nmnist && (spec.width > 255 || spec.height > 255) {
        return Err(Error::invalid("width/height", "N-MNIST records hold 8-bit coordinates"));
    }
    let splits = match format {
        SyntheticFormat::Nmnist => [("Train", train_per_class), ("Test", test_per_class)],
        SyntheticFormat::Text => [("train", train_per_class), ("test", test_per_class)],
    };
    let mut sample_seed = seed;
    for (split, n) in splits {
        for class in 0..2usize {
            let dir = root.join(split).join(class.to_string());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for i in 0..n {
                sample_seed = sample_seed.wrapping_add(1);
                let events = sample(class, spec, sample_seed);
                let (path, bytes) = match format {
                    SyntheticFormat::Nmnist => (dir.join(format!("{i:05}.bin")), encode_nmnist(&events)?),
                    SyntheticFormat::Text => (dir.join(format!("{i:05}.txt")), write_text_events(&events).into_bytes()),
                };
                fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_sorted_in_range_and_deterministic() {
        let spec = SyntheticSpec::default();
        for class in 0..2 {
            let a = sample(class, &spec, 9);
            assert_eq!(a, sample(class, &spec, 9));
            assert!(!a.is_empty());
            assert!(a.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us));
            assert!(a.iter().all(|e| e.x < 34 && e.y < 34 && e.timestamp_us < 90_000));
        }
        assert_ne!(sample(0, &spec, 1), sample(1, &spec, 1));
    }

    #[test]
    fn glyphs_differ() {
        let h = glyph(0, 16, 16, 8);
        let v = glyph(1, 16, 16, 8);
        assert_eq!(h.len(), v.len());
        assert!(h.contains(&(24, 16)) && !h.contains(&(16, 24)));
        assert!(v.contains(&(16, 24)) && !v.contains(&(24, 16)));
    }

    #[test]
    fn dataset_layout() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), SyntheticFormat::Nmnist, &SyntheticSpec::default(), 2, 1, 0).unwrap();
        assert!(dir.path().join("Train/1/00001.bin").is_file());
        assert!(dir.path().join("Test/0/00000.bin").is_file());
        write_dataset(dir.path(), SyntheticFormat::Text, &SyntheticSpec::default(), 1, 1, 0).unwrap();
        assert!(dir.path().join("test/1/00000.txt").is_file());
    }
}
