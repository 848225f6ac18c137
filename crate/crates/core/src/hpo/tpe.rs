//! Density-ratio sampler in the style of TPE/BOHB, factorized per dimension.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::space::{Assignment, ParamKind, SearchSpace};
use super::TrialResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeSampler {
    /// Probability of a plain uniform draw once a model is available.
    pub random_fraction: f64,
    /// Share of observations forming the "good" density.
    pub top_fraction: f64,
    pub candidates: usize,
    pub min_bandwidth: f64,
    /// Widening of the good kernels when drawing candidates.
    pub bandwidth_factor: f64,
}

impl Default for TpeSampler {
    fn default() -> Self {
        Self {
            random_fraction: 1.0 / 3.0,
            top_fraction: 0.15,
            candidates: 64,
            min_bandwidth: 1e-3,
            bandwidth_factor: 3.0,
        }
    }
}

/// Per-dimension Gaussian KDE on the unit interval, or smoothed frequencies
/// for categorical dimensions.
enum Marginal {
    Continuous { points: Vec<f64>, bandwidth: f64 },
    Categorical { probs: Vec<f64> },
}

impl Marginal {
    fn fit(values: &[f64], n_choices: Option<usize>, min_bw: f64) -> Self {
        match n_choices {
            Some(k) => {
                let mut counts = vec![1.0; k];
                for &v in values {
                    counts[v as usize] += 1.0;
                }
                let total: f64 = counts.iter().sum();
                Marginal::Categorical {
                    probs: counts.into_iter().map(|c| c / total).collect(),
                }
            }
            None => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                // Normal-reference rule.
                let bandwidth = (1.06 * var.sqrt() * n.powf(-0.2)).max(min_bw);
                Marginal::Continuous {
                    points: values.to_vec(),
                    bandwidth,
                }
            }
        }
    }

    fn density(&self, v: f64) -> f64 {
        match self {
            Marginal::Continuous { points, bandwidth } => {
                let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
                points
                    .iter()
                    .map(|p| norm * (-0.5 * ((v - p) / bandwidth).powi(2)).exp())
                    .sum::<f64>()
                    / points.len() as f64
            }
            Marginal::Categorical { probs } => probs[v as usize],
        }
    }
}

impl TpeSampler {
    /// Proposes the next configuration given all results so far.
    pub fn sample(&self, space: &SearchSpace, history: &[TrialResult], rng: &mut impl Rng) -> Assignment {
        match self.model_budget(space, history) {
            Some(budget) if rng.random::<f64>() >= self.random_fraction => {
                let obs: Vec<&TrialResult> = history
                    .iter()
                    .filter(|t| t.is_ok() && t.budget == budget && space.contains(&t.config))
                    .collect();
                self.sample_model(space, &obs, rng)
            }
            _ => space.sample_uniform(rng),
        }
    }

    /// Largest budget with at least `dimension + 2` completed trials.
    pub fn model_budget(&self, space: &SearchSpace, history: &[TrialResult]) -> Option<u64> {
        let mut per_budget: BTreeMap<u64, usize> = BTreeMap::new();
        for t in history.iter().filter(|t| t.is_ok()) {
            *per_budget.entry(t.budget).or_default() += 1;
        }
        per_budget
            .into_iter()
            .rev()
            .find(|&(_, n)| n >= space.dimension() + 2)
            .map(|(b, _)| b)
    }

    /// Draws from the good/bad density ratio fitted on `obs`.
    pub fn sample_model(&self, space: &SearchSpace, obs: &[&TrialResult], rng: &mut impl Rng) -> Assignment {
        if obs.len() < 2 {
            return space.sample_uniform(rng);
        }
        let mut ranked: Vec<&TrialResult> = obs.to_vec();
        ranked.sort_by(|a, b| b.objective.total_cmp(&a.objective).then(a.trial_id.cmp(&b.trial_id)));
        let n_good = ((self.top_fraction * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len() - 1);
        let (good, bad) = ranked.split_at(n_good);

        let encode = |t: &TrialResult| -> Vec<f64> {
            space
                .params
                .iter()
                .map(|p| {
                    let v = t.config[&p.name];
                    match p.choice_index(v) {
                        Some(i) => i as f64,
                        None => p.to_unit(v),
                    }
                })
                .collect()
        };
        let good_pts: Vec<Vec<f64>> = good.iter().map(|t| encode(t)).collect();
        let bad_pts: Vec<Vec<f64>> = bad.iter().map(|t| encode(t)).collect();

        let choices = |d: usize| match &space.params[d].kind {
            ParamKind::Categorical { choices } => Some(choices.len()),
            _ => None,
        };
        let column = |pts: &[Vec<f64>], d: usize| pts.iter().map(|p| p[d]).collect::<Vec<_>>();
        let dims = space.dimension();
        let good_m: Vec<Marginal> = (0..dims)
            .map(|d| Marginal::fit(&column(&good_pts, d), choices(d), self.min_bandwidth))
            .collect();
        let bad_m: Vec<Marginal> = (0..dims)
            .map(|d| Marginal::fit(&column(&bad_pts, d), choices(d), self.min_bandwidth))
            .collect();

        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..self.candidates.max(1) {
            let anchor = &good_pts[rng.random_range(0..good_pts.len())];
            let cand: Vec<f64> = (0..dims)
                .map(|d| match &good_m[d] {
                    Marginal::Continuous { bandwidth, .. } => {
                        let sd = bandwidth * self.bandwidth_factor;
                        Normal::new(anchor[d], sd)
                            .map(|n| n.sample(rng))
                            .unwrap_or(anchor[d])
                            .clamp(0.0, 1.0)
                    }
                    Marginal::Categorical { probs } => {
                        let mut x = rng.random::<f64>();
                        let mut pick = probs.len() - 1;
                        for (i, p) in probs.iter().enumerate() {
                            if x < *p {
                                pick = i;
                                break;
                            }
                            x -= p;
                        }
                        pick as f64
                    }
                })
                .collect();
            let score: f64 = (0..dims)
                .map(|d| (good_m[d].density(cand[d]).max(1e-300)).ln() - (bad_m[d].density(cand[d]).max(1e-300)).ln())
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
        let (_, x) = best.expect("at least one candidate");
        space
            .params
            .iter()
            .zip(x)
            .map(|(p, u)| {
                let v = match &p.kind {
                    ParamKind::Categorical { choices } => choices[u as usize],
                    _ => p.from_unit(u),
                };
                (p.name.clone(), v)
            })
            .collect()
    }
}
