//! Hyperband with a model-based sampler ("BOHB-lite").
//!
//! Brackets from [`hyperband_schedule`] are run in order, repeatedly, until
//! the configured number of distinct configurations has been drawn. Each
//! rung is evaluated in parallel; the sampler and the history are only
//! touched between rungs, so a campaign is deterministic for a given seed
//! and a deterministic objective.

pub mod hyperband;
pub mod space;
pub mod tpe;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hyperband::{hyperband_schedule, Bracket, Rung};
pub use space::{Assignment, ParamKind, ParamSpec, SearchSpace};
pub use tpe::TpeSampler;

use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSample {
    pub trial_id: usize,
    pub params: Assignment,
    pub budget: u64,
    pub seed: u64,
}

/// One evaluation. Serialized as one line of the campaign log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: usize,
    pub config: Assignment,
    pub budget: u64,
    pub objective: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub status: TrialStatus,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoOptions {
    /// Distinct configurations to draw over the whole campaign.
    pub iterations: usize,
    pub max_budget: u64,
    pub eta: u64,
    pub seed: u64,
    pub sampler: TpeSampler,
}

impl Default for HpoOptions {
    fn default() -> Self {
        Self {
            iterations: 24,
            max_budget: 9,
            eta: 3,
            seed: 0,
            sampler: TpeSampler::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpoOutcome {
    pub best: TrialResult,
    pub history: Vec<TrialResult>,
    /// Evaluations actually run (the rest were replayed from a log).
    pub evaluated: usize,
}

fn trial_seed(campaign: u64, trial_id: usize) -> u64 {
    campaign ^ (trial_id as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Highest objective among trials at the largest budget, ties to the lowest id.
pub fn best_trial(history: &[TrialResult]) -> Option<&TrialResult> {
    let top = history.iter().filter(|t| t.is_ok()).map(|t| t.budget).max()?;
    history
        .iter()
        .filter(|t| t.is_ok() && t.budget == top)
        .min_by(|a, b| b.objective.total_cmp(&a.objective).then(a.trial_id.cmp(&b.trial_id)))
}

/// Runs a campaign.
///
/// `prior` holds results from an earlier (possibly truncated) run of the same
/// campaign; matching `(trial_id, budget)` pairs are replayed instead of
/// re-evaluated. `on_trial` sees every newly evaluated trial, in history
/// order. Objective errors and non-finite values become failed trials with
/// objective 0.
pub fn run_optimization<F>(
    space: &SearchSpace,
    opts: &HpoOptions,
    objective: F,
    prior: &[TrialResult],
    mut on_trial: impl FnMut(&TrialResult) -> Result<()>,
) -> Result<HpoOutcome>
where
    F: Fn(&ConfigSample) -> std::result::Result<f64, String> + Sync + Send,
{
    space.validate()?;
    if opts.iterations == 0 {
        return Err(Error::invalid("iterations", "must be >= 1"));
    }
    let brackets = hyperband_schedule(opts.max_budget, opts.eta)?;
    let replay: HashMap<(usize, u64), &TrialResult> = prior.iter().map(|t| ((t.trial_id, t.budget), t)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut history: Vec<TrialResult> = Vec::new();
    let mut next_id = 0usize;
    let mut evaluated = 0usize;

    'campaign: loop {
        for bracket in &brackets {
            if next_id >= opts.iterations {
                break 'campaign;
            }
            let n = bracket.n_configs.min(opts.iterations - next_id);
            let mut survivors: Vec<ConfigSample> = (0..n)
                .map(|_| {
                    let params = opts.sampler.sample(space, &history, &mut rng);
                    let id = next_id;
                    next_id += 1;
                    ConfigSample {
                        trial_id: id,
                        params,
                        budget: 0,
                        seed: trial_seed(opts.seed, id),
                    }
                })
                .collect();

            for (i, rung) in bracket.rungs.iter().enumerate() {
                for c in survivors.iter_mut() {
                    c.budget = rung.budget;
                }
                let results: Vec<(TrialResult, bool)> = exec::map_collect(&survivors, |c| {
                    if let Some(done) = replay.get(&(c.trial_id, c.budget)) {
                        if done.config == c.params {
                            return ((*done).clone(), false);
                        }
                        log::warn!("logged trial {} differs from the replayed draw; re-evaluating", c.trial_id);
                    }
                    (evaluate(&objective, c), true)
                });
                for (r, fresh) in &results {
                    if *fresh {
                        evaluated += 1;
                        on_trial(r)?;
                    }
                }
                let mut ranked: Vec<(f64, usize)> = results.iter().map(|(r, _)| (r.objective, r.trial_id)).collect();
                history.extend(results.into_iter().map(|(r, _)| r));

                if i + 1 == bracket.rungs.len() {
                    break;
                }
                let keep = survivors.len() / opts.eta as usize;
                if keep == 0 {
                    break;
                }
                ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let kept: Vec<usize> = ranked[..keep].iter().map(|&(_, id)| id).collect();
                survivors.retain(|c| kept.contains(&c.trial_id));
            }
        }
    }

    let best = best_trial(&history)
        .or_else(|| history.first())
        .cloned()
        .ok_or_else(|| Error::invalid("iterations", "no trial was run"))?;
    Ok(HpoOutcome {
        best,
        history,
        evaluated,
    })
}

fn evaluate<F>(objective: &F, c: &ConfigSample) -> TrialResult
where
    F: Fn(&ConfigSample) -> std::result::Result<f64, String>,
{
    let start = Instant::now();
    let outcome = objective(c);
    let duration_s = start.elapsed().as_secs_f64();
    let (objective, status) = match outcome {
        Ok(v) if v.is_finite() => (v, TrialStatus::Ok),
        Ok(v) => {
            log::warn!("trial {} returned non-finite objective {v}", c.trial_id);
            (0.0, TrialStatus::Failed)
        }
        Err(e) => {
            log::warn!("trial {} failed: {e}", c.trial_id);
            (0.0, TrialStatus::Failed)
        }
    };
    TrialResult {
        trial_id: c.trial_id,
        config: c.params.clone(),
        budget: c.budget,
        objective,
        seed: c.seed,
        duration_s,
        status,
    }
}

/// Line-delimited JSON campaign log.
pub struct CampaignLog {
    path: PathBuf,
    file: File,
}

impl CampaignLog {
    /// Opens `path` for appending, creating it if needed.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn write(&mut self, trial: &TrialResult) -> Result<()> {
        let line = serde_json::to_string(trial).map_err(|e| Error::parse("campaign log", e))?;
        writeln!(self.file, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }

    /// Reads every complete record. A torn final line is ignored.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TrialResult>(line) {
                Ok(t) => out.push(t),
                Err(e) if i + 1 == lines.len() => {
                    log::warn!("{}: ignoring incomplete last record ({e})", path.display());
                }
                Err(e) => return Err(Error::parse(format!("{} line {}", path.display(), i + 1), e)),
            }
        }
        Ok(out)
    }
}
