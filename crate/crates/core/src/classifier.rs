//! Unsupervised readout: each population takes the label it fired for most
//! during training; test samples are classified by order-weighted votes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::Step;
use crate::pipeline::LayerSpike;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeCountTable {
    labels: usize,
    counts: Vec<Vec<u64>>,
}

impl SpikeCountTable {
    pub fn new(populations: usize, labels: usize) -> Self {
        Self {
            labels,
            counts: vec![vec![0; labels]; populations],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let labels = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|row| row.len() != labels) {
            return Err(Error::Classifier("ragged spike-count table".into()));
        }
        Ok(Self { labels, counts })
    }

    pub fn populations(&self) -> usize {
        self.counts.len()
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn add(&mut self, population: usize, label: usize, n: u64) {
        self.counts[population][label] += n;
    }

    /// Counts every spike of a training sample towards its label.
    pub fn record(&mut self, spikes: &[LayerSpike], label: usize) {
        for s in spikes {
            self.add(s.population, label, 1);
        }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    /// `None` for populations that never fired.
    pub labels: Vec<Option<usize>>,
}

impl LabelMap {
    pub fn assigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().flatten().copied()
    }

    pub fn has_assignments(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }
}

pub fn assign_labels(table: &SpikeCountTable) -> Result<LabelMap> {
    if table.populations() == 0 || table.labels() == 0 {
        return Err(Error::Classifier("empty spike-count table".into()));
    }
    let labels = table
        .counts()
        .iter()
        .map(|row| {
            // max_by_key keeps the last maximum; iterate in reverse so ties go to the lower id.
            let (label, &best) = row.iter().enumerate().rev().max_by_key(|(_, &c)| c)?;
            (best > 0).then_some(label)
        })
        .collect();
    Ok(LabelMap { labels })
}

/// Weight of the r-th spike (r starting at 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderWeighting {
    /// `1 / r`
    #[default]
    Harmonic,
    /// Every spike counts 1.
    Uniform,
}

impl OrderWeighting {
    pub fn weight(self, rank: usize) -> f64 {
        match self {
            Self::Harmonic => 1.0 / rank as f64,
            Self::Uniform => 1.0,
        }
    }
}

/// `(population, step)` pairs in arrival order.
pub fn spike_log(spikes: &[LayerSpike]) -> Vec<(usize, Step)> {
    spikes.iter().map(|s| (s.population, s.step)).collect()
}

pub fn infer(log: &[(usize, Step)], map: &LabelMap, weighting: OrderWeighting) -> Result<usize> {
    infer_with(log, map, |r| weighting.weight(r))
}

/// Order-weighted vote with an arbitrary rank weight.
///
/// Spikes are ranked by step, ties within a step by population (stable
/// otherwise). Score ties go to the lower label; an empty log yields the
/// lowest assigned label.
pub fn infer_with(log: &[(usize, Step)], map: &LabelMap, weight: impl Fn(usize) -> f64) -> Result<usize> {
    let lowest = map
        .assigned()
        .min()
        .ok_or_else(|| Error::Classifier("no population has an assigned label".into()))?;
    let n_labels = map.assigned().max().map_or(0, |m| m + 1);
    let mut ordered: Vec<(usize, Step)> = log.to_vec();
    ordered.sort_by_key(|&(p, t)| (t, p));
    let mut scores = vec![0.0; n_labels];
    for (rank, &(population, _)) in ordered.iter().enumerate() {
        if let Some(Some(label)) = map.labels.get(population) {
            scores[*label] += weight(rank + 1);
        }
    }
    if ordered.is_empty() {
        return Ok(lowest);
    }
    let mut best = lowest;
    for label in map.assigned() {
        if scores[label] > scores[best] || (scores[label] == scores[best] && label < best) {
            best = label;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Records one binary prediction; label 1 is the positive class.
    pub fn record(&mut self, truth: usize, predicted: usize) {
        match (truth == 1, predicted == 1) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    if c.total() == 0 {
        return Err(Error::Classifier("accuracy of an empty confusion table".into()));
    }
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[u64]]) -> SpikeCountTable {
        SpikeCountTable::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn assignment_rules() {
        assert_eq!(assign_labels(&table(&[&[10, 3]])).unwrap().labels, vec![Some(0)]);
        assert_eq!(assign_labels(&table(&[&[4, 4]])).unwrap().labels, vec![Some(0)]);
        assert_eq!(assign_labels(&table(&[&[0, 0]])).unwrap().labels, vec![None]);
        assert_eq!(
            assign_labels(&table(&[&[1, 5, 5], &[0, 0, 2]])).unwrap().labels,
            vec![Some(1), Some(2)]
        );
        assert!(assign_labels(&SpikeCountTable::new(0, 2)).is_err());
    }

    fn map(labels: &[Option<usize>]) -> LabelMap {
        LabelMap {
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn single_spike() {
        let m = map(&[Some(0), Some(1)]);
        assert_eq!(infer(&[(1, 0)], &m, OrderWeighting::Harmonic).unwrap(), 1);
    }

    #[test]
    fn harmonic_order_weighting() {
        // label 0: 1; label 1: 1/2 + 1/3
        let m = map(&[Some(0), Some(1)]);
        let log = [(0, 0), (1, 1), (1, 2)];
        assert_eq!(infer(&log, &m, OrderWeighting::Harmonic).unwrap(), 0);
        assert_eq!(infer(&log, &m, OrderWeighting::Uniform).unwrap(), 1);
    }

    #[test]
    fn same_step_ties_ranked_by_population() {
        let m = map(&[Some(1), Some(0)]);
        // Both at step 3: population 0 (label 1) ranks first.
        assert_eq!(infer(&[(1, 3), (0, 3)], &m, OrderWeighting::Harmonic).unwrap(), 1);
    }

    #[test]
    fn empty_log_and_unassigned() {
        let m = map(&[Some(1), None, Some(0)]);
        assert_eq!(infer(&[], &m, OrderWeighting::Harmonic).unwrap(), 0);
        // Spikes from unassigned populations contribute nothing.
        assert_eq!(infer(&[(1, 0), (0, 1)], &m, OrderWeighting::Harmonic).unwrap(), 1);
        assert!(infer(&[(0, 0)], &map(&[None, None]), OrderWeighting::Harmonic).is_err());
    }

    #[test]
    fn accuracy_values() {
        let c = |tp, tn, fp, fn_| ConfusionCounts { tp, tn, fp, fn_ };
        assert_eq!(accuracy(&c(5, 5, 0, 0)).unwrap(), 1.0);
        assert_eq!(accuracy(&c(3, 2, 1, 4)).unwrap(), 0.5);
        assert_eq!(accuracy(&c(0, 0, 7, 3)).unwrap(), 0.0);
        assert!(accuracy(&c(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn confusion_recording() {
        let mut c = ConfusionCounts::default();
        for (t, p) in [(1, 1), (0, 0), (0, 1), (1, 0), (1, 1)] {
            c.record(t, p);
        }
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 1, fp: 1, fn_: 1 });
    }
}
