//! Experiment configuration, repeated training runs and HPO objectives.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    accuracy, assign_labels, infer, spike_log, ConfusionCounts, LabelMap, OrderWeighting, SpikeCountTable,
};
use crate::dataset::{load_pair, DatasetKind, Sample, Split};
use crate::error::{Error, Result};
use crate::events::{bin_events, BinSpec, EventFrame, GESTURE_EXCLUDED_CLASS};
use crate::exec;
use crate::hpo::{self, Assignment, HpoOptions, ParamSpec, SearchSpace, TpeSampler};
use crate::neuron::{NeuronModelKind, NeuronParams};
use crate::pipeline::{Architecture, Network, NetworkConfig, StdpConfig, SynapticKernel, ThresholdSettings, WeightInit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: PathBuf,
    /// The binary task: `classes[0]` is label 0, `classes[1]` label 1.
    pub classes: [u32; 2],
    /// Sample caps per split; 0 takes the whole split.
    pub max_train: usize,
    pub max_test: usize,
    /// Held-out tail of the training split used as the HPO objective.
    pub max_validation: usize,
    /// Spatial pooling factor; unset means 4 for gestures, 1 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downsample: Option<u32>,
    /// Sensor size; required for text datasets only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Nmnist,
            path: PathBuf::from("data/N-MNIST"),
            classes: [0, 1],
            max_train: 500,
            max_test: 200,
            max_validation: 100,
            downsample: None,
            width: None,
            height: None,
        }
    }
}

impl DatasetConfig {
    pub fn sensor(&self) -> Result<(u32, u32)> {
        match (self.kind.sensor(), self.width, self.height) {
            (_, Some(w), Some(h)) => Ok((w, h)),
            (Some(wh), None, None) => Ok(wh),
            _ => Err(Error::Config(format!(
                "dataset.width and dataset.height must both be set for `{}` datasets",
                self.kind
            ))),
        }
    }

    pub fn downsample(&self) -> u32 {
        self.downsample
            .unwrap_or(if self.kind == DatasetKind::Gesture { 4 } else { 1 })
    }

    /// Network input `(channels, height, width)` after downsampling.
    pub fn input_dims(&self) -> Result<(usize, usize, usize)> {
        let (w, h) = self.sensor()?;
        let d = self.downsample();
        if d == 0 || w % d != 0 || h % d != 0 {
            return Err(Error::invalid("dataset.downsample", format!("{d} does not divide {w}x{h}")));
        }
        Ok((1, (h / d) as usize, (w / d) as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            repeats: 11,
            seed: 0,
            workers: 0,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

/// How label-assignment spike counts are gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPass {
    /// A second pass over the training samples with the final, frozen weights.
    #[default]
    Frozen,
    /// The spikes emitted while learning.
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub weighting: OrderWeighting,
    pub label_pass: LabelPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSettings {
    pub iterations: usize,
    pub max_budget: u64,
    pub eta: u64,
    pub sampler: TpeSampler,
}

impl Default for HpoSettings {
    fn default() -> Self {
        let o = HpoOptions::default();
        Self {
            iterations: o.iterations,
            max_budget: o.max_budget,
            eta: o.eta,
            sampler: o.sampler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: NeuronModelKind,
    pub dataset: DatasetConfig,
    /// `t_s` is also the event-binning window.
    pub neuron: NeuronParams,
    pub stdp: StdpConfig,
    pub threshold: ThresholdSettings,
    pub architecture: Architecture,
    pub init: WeightInit,
    pub classifier: ClassifierSettings,
    pub run: RunSettings,
    pub hpo: HpoSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: NeuronModelKind::Lif,
            dataset: DatasetConfig::default(),
            neuron: NeuronParams::default(),
            stdp: StdpConfig::default(),
            threshold: ThresholdSettings::default(),
            architecture: Architecture::default(),
            init: WeightInit::default(),
            classifier: ClassifierSettings::default(),
            run: RunSettings::default(),
            hpo: HpoSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The default configuration with a short header, as written by
    /// `ifsnn config`.
    pub fn reference() -> String {
        let body = Self::default().to_toml().expect("default config serializes");
        format!(
            "# ifsnn experiment configuration: every key with its default value.\n\
             # Optional keys not shown: dataset.downsample (4 for gestures, else 1),\n\
             # dataset.width / dataset.height (text datasets).\n\n{body}"
        )
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.dataset.classes;
        if a == b {
            return Err(Error::invalid("dataset.classes", "need two different classes"));
        }
        if self.dataset.kind == DatasetKind::Gesture && (a == GESTURE_EXCLUDED_CLASS || b == GESTURE_EXCLUDED_CLASS) {
            return Err(Error::invalid("dataset.classes", "gesture class 11 (other) is excluded"));
        }
        if self.run.repeats == 0 {
            return Err(Error::invalid("run.repeats", "must be >= 1"));
        }
        if self.dt_us() == 0 {
            return Err(Error::invalid("neuron.t_s", "binning window rounds to 0 us"));
        }
        self.network_config()?.validate()?;
        hpo::hyperband_schedule(self.hpo.max_budget, self.hpo.eta)?;
        if self.hpo.iterations == 0 {
            return Err(Error::invalid("hpo.iterations", "must be >= 1"));
        }
        Ok(())
    }

    pub fn network_config(&self) -> Result<NetworkConfig> {
        Ok(NetworkConfig {
            model: self.model,
            neuron: self.neuron,
            stdp: self.stdp,
            lambda: self.threshold.lambda,
            architecture: self.architecture,
            init: self.init,
            input: self.dataset.input_dims()?,
        })
    }

    /// Binning window in microseconds (`t_s` is in milliseconds).
    pub fn dt_us(&self) -> u64 {
        (self.neuron.t_s * 1000.0).round() as u64
    }

    pub fn bin_spec(&self) -> Result<BinSpec> {
        let (width, height) = self.dataset.sensor()?;
        Ok(BinSpec {
            dt_us: self.dt_us(),
            width,
            height,
            t_s: self.neuron.t_s,
            downsample: self.dataset.downsample(),
            duration_us: None,
        })
    }

    /// Returns a copy with HPO parameters applied.
    ///
    /// `theta_rh_frac` and `u_c_frac` place the EIF rheobase and the QIF
    /// cut-off as a fraction of the way from rest to threshold; `a_minus` is
    /// searched by magnitude.
    pub fn with_assignment(&self, a: &Assignment) -> Result<Self> {
        let mut c = self.clone();
        let span = c.neuron.v_thresh - c.neuron.u_rest;
        for (name, &v) in a {
            match name.as_str() {
                "tau_m" => c.neuron.tau_m = v,
                "dt" | "t_s" => c.neuron.t_s = v,
                "t_ref" => c.neuron.t_ref = v,
                "lambda" => c.threshold.lambda = v,
                "a_plus" => c.stdp.a_plus = v,
                "a_minus" => c.stdp.a_minus = -v.abs(),
                "delta_t" => c.neuron.delta_t = v,
                "theta_rh_frac" => c.neuron.theta_rh = c.neuron.u_rest + v * span,
                "a0" => c.neuron.a0 = v,
                "u_c_frac" => c.neuron.u_c = c.neuron.u_rest + v * span,
                "populations" => c.architecture.populations = v as usize,
                "kernel_size" => c.architecture.kernel_size = v as usize,
                other => return Err(Error::Config(format!("unknown hyperparameter `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Search space used by `ifsnn hpo` for each model.
pub fn default_search_space(model: NeuronModelKind) -> SearchSpace {
    let mut params = vec![
        ParamSpec::log("tau_m", 1.0, 100.0),
        ParamSpec::linear("lambda", 0.05, 1.0),
        ParamSpec::log("a_plus", 1e-4, 0.1),
        ParamSpec::log("a_minus", 1e-4, 0.1),
        ParamSpec::categorical("dt", &[0.5, 1.0, 2.0, 5.0]),
    ];
    match model {
        NeuronModelKind::Lif => {}
        NeuronModelKind::Eif => {
            params.push(ParamSpec::log("delta_t", 0.1, 10.0));
            params.push(ParamSpec::linear("theta_rh_frac", 0.3, 0.95));
        }
        NeuronModelKind::Qif => {
            params.push(ParamSpec::log("a0", 0.01, 1.0));
            params.push(ParamSpec::linear("u_c_frac", 0.1, 0.9));
        }
    }
    SearchSpace::new(params).expect("built-in search space is valid")
}

/// Raw samples of one binary task, decoded once and re-binned per config.
#[derive(Debug, Clone, Default)]
pub struct TaskData {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl TaskData {
    /// Loads the train and test splits (and the validation tail when
    /// `with_validation`).
    pub fn load(cfg: &DatasetConfig, with_validation: bool) -> Result<Self> {
        let root = &cfg.path;
        if !root.is_dir() {
            return Err(Error::Dataset(format!("{}: dataset directory not found", root.display())));
        }
        let cap = |n: usize| (n > 0).then_some(n);
        let train = load_pair(cfg.kind, root, Split::Train, cfg.classes, 0, cap(cfg.max_train))?;
        let validation = if with_validation {
            let v = load_pair(cfg.kind, root, Split::Train, cfg.classes, train.len(), Some(cfg.max_validation))?;
            if v.is_empty() {
                return Err(Error::Dataset(format!(
                    "{}: no training samples left for validation after the first {}",
                    root.display(),
                    train.len()
                )));
            }
            v
        } else {
            Vec::new()
        };
        let test = load_pair(cfg.kind, root, Split::Test, cfg.classes, 0, cap(cfg.max_test))?;
        Ok(Self { train, validation, test })
    }
}

/// A sample ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSample {
    pub label: usize,
    pub frames: Vec<EventFrame>,
}

pub fn bin_samples(samples: &[Sample], spec: &BinSpec) -> Result<Vec<BinnedSample>> {
    exec::map_collect(samples, |s| {
        let frames = bin_events(&s.events, spec).map_err(|e| match e {
            Error::EventOutOfRange { .. } => Error::Dataset(format!("{}: {e}", s.source.display())),
            other => other,
        })?;
        Ok(BinnedSample { label: s.label, frames })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: usize,
    #[serde(rename = "true")]
    pub truth: usize,
    pub predicted: usize,
}

/// Result of one training + evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: ConfusionCounts,
    pub kernel: SynapticKernel,
    pub labels: LabelMap,
    pub predictions: Vec<Prediction>,
    /// Training order (indices into the training set).
    pub order: Vec<usize>,
    pub wall_time_s: f64,
}

fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f0d_e25a_3b1e);
    order.shuffle(&mut rng);
    order
}

/// Predicts every sample with frozen weights. Falls back to label 0 when no
/// population has a label (a network that never fired).
pub fn predict(net: &Network, labels: &LabelMap, weighting: OrderWeighting, samples: &[BinnedSample]) -> Result<Vec<Prediction>> {
    if !labels.has_assignments() {
        log::warn!("no population was assigned a label; predicting label 0 throughout");
    }
    let indexed: Vec<(usize, &BinnedSample)> = samples.iter().enumerate().collect();
    exec::map_collect(&indexed, |&(i, s)| {
        let predicted = if labels.has_assignments() {
            let response = net.respond(&s.frames)?;
            infer(&spike_log(&response.spikes), labels, weighting)?
        } else {
            0
        };
        Ok(Prediction {
            sample_id: i,
            truth: s.label,
            predicted,
        })
    })
    .into_iter()
    .collect()
}

pub fn confusion(predictions: &[Prediction]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for p in predictions {
        c.record(p.truth, p.predicted);
    }
    c
}

/// Labels populations from their spike counts over `samples` with frozen weights.
pub fn label_populations(net: &Network, samples: &[BinnedSample]) -> Result<LabelMap> {
    let responses: Vec<Result<_>> = exec::map_collect(samples, |s| net.respond(&s.frames));
    let mut table = SpikeCountTable::new(net.config().architecture.populations, 2);
    for (r, s) in responses.into_iter().zip(samples) {
        table.record(&r?.spikes, s.label);
    }
    assign_labels(&table)
}

/// Trains one network on `train` (in a seed-dependent order), labels its
/// populations and evaluates it on `test`.
pub fn train_and_evaluate(
    cfg: &ExperimentConfig,
    train: &[BinnedSample],
    test: &[BinnedSample],
    seed: u64,
) -> Result<RepeatOutcome> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Dataset("need at least one training and one test sample".into()));
    }
    let start = Instant::now();
    let mut net = Network::new(cfg.network_config()?, seed)?;
    let order = shuffled_order(train.len(), seed);
    let mut online = SpikeCountTable::new(cfg.architecture.populations, 2);
    for &i in &order {
        let r = net.train_sample(&train[i].frames)?;
        online.record(&r.spikes, train[i].label);
    }
    let labels = match cfg.classifier.label_pass {
        LabelPass::Online => assign_labels(&online)?,
        LabelPass::Frozen => label_populations(&net, train)?,
    };
    let predictions = predict(&net, &labels, cfg.classifier.weighting, test)?;
    let confusion = confusion(&predictions);
    Ok(RepeatOutcome {
        seed,
        accuracy: accuracy(&confusion)?,
        confusion,
        kernel: net.kernel().clone(),
        labels,
        predictions,
        order,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Summary of a repeated experiment. Deterministic for a given config and
/// seed: wall times live in [`Timings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: NeuronModelKind,
    pub dataset: DatasetKind,
    pub classes: [u32; 2],
    pub train_samples: usize,
    pub test_samples: usize,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub best: f64,
    pub confusion: Vec<ConfusionCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_time_s: Vec<f64>,
    pub total_s: f64,
}

/// `(mean, population std, max)`.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), best)
}

impl RunReport {
    pub fn from_outcomes(cfg: &ExperimentConfig, train: usize, test: usize, outcomes: &[RepeatOutcome]) -> Self {
        let accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
        let (mean, std, best) = summarize(&accuracies);
        Self {
            model: cfg.model,
            dataset: cfg.dataset.kind,
            classes: cfg.dataset.classes,
            train_samples: train,
            test_samples: test,
            seeds: outcomes.iter().map(|o| o.seed).collect(),
            accuracies,
            mean,
            std,
            best,
            confusion: outcomes.iter().map(|o| o.confusion).collect(),
        }
    }
}

/// Runs `cfg.run.repeats` independent trainings (seeds `seed + i`) in parallel.
pub fn run_repeats(
    cfg: &ExperimentConfig,
    train: &[BinnedSample],
    test: &[BinnedSample],
) -> Result<Vec<RepeatOutcome>> {
    let seeds: Vec<u64> = (0..cfg.run.repeats as u64).map(|i| cfg.run.seed.wrapping_add(i)).collect();
    exec::with_workers(cfg.run.workers, || {
        exec::map_collect(&seeds, |&s| train_and_evaluate(cfg, train, test, s))
            .into_iter()
            .collect()
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse("csv", e))?;
    }
    w.into_inner().map_err(|e| Error::parse("csv", e))
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    population: usize,
    label: Option<usize>,
}

pub fn labels_csv(map: &LabelMap) -> Result<Vec<u8>> {
    let rows: Vec<LabelRow> = map
        .labels
        .iter()
        .enumerate()
        .map(|(population, &label)| LabelRow { population, label })
        .collect();
    csv_bytes(&rows)
}

pub fn read_labels_csv(path: &Path) -> Result<LabelMap> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    let mut labels = Vec::new();
    for (i, row) in r.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path.display().to_string(), e))?;
        if row.population != i {
            return Err(Error::parse(path.display().to_string(), "populations must be listed in order"));
        }
        labels.push(row.label);
    }
    Ok(LabelMap { labels })
}

pub fn predictions_csv(predictions: &[Prediction]) -> Result<Vec<u8>> {
    csv_bytes(predictions)
}

/// Files written for one repeat, relative to the run directory.
pub fn repeat_dir(out: &Path, i: usize) -> PathBuf {
    out.join(format!("repeat_{i:02}"))
}

/// Writes `report.json`, `timings.json` and per-repeat `kernel.bin`,
/// `labels.csv`, `predictions.csv`.
pub fn write_run(out: &Path, report: &RunReport, outcomes: &[RepeatOutcome], total_s: f64) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::parse("report", e))?;
    write_file(&out.join("report.json"), format!("{json}\n").as_bytes())?;
    let timings = Timings {
        wall_time_s: outcomes.iter().map(|o| o.wall_time_s).collect(),
        total_s,
    };
    let json = serde_json::to_string_pretty(&timings).map_err(|e| Error::parse("timings", e))?;
    write_file(&out.join("timings.json"), format!("{json}\n").as_bytes())?;
    for (i, o) in outcomes.iter().enumerate() {
        let dir = repeat_dir(out, i);
        write_file(&dir.join("kernel.bin"), &o.kernel.to_bytes())?;
        write_file(&dir.join("labels.csv"), &labels_csv(&o.labels)?)?;
        write_file(&dir.join("predictions.csv"), &predictions_csv(&o.predictions)?)?;
    }
    Ok(())
}

/// Loads the task, runs every repeat and writes the results to
/// `cfg.run.out_dir`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = TaskData::load(&cfg.dataset, false)?;
    let spec = cfg.bin_spec()?;
    let train = bin_samples(&data.train, &spec)?;
    let test = bin_samples(&data.test, &spec)?;
    log::info!(
        "{} {:?}: {} train / {} test samples, {} repeats",
        cfg.model,
        cfg.dataset.classes,
        train.len(),
        test.len(),
        cfg.run.repeats
    );
    let outcomes = run_repeats(cfg, &train, &test)?;
    let report = RunReport::from_outcomes(cfg, train.len(), test.len(), &outcomes);
    write_run(&cfg.run.out_dir, &report, &outcomes, start.elapsed().as_secs_f64())?;
    Ok(report)
}

/// Evaluates a saved kernel and label map on the test split.
pub fn cmd_eval(cfg: &ExperimentConfig, kernel: &Path, labels: &Path) -> Result<(f64, Vec<Prediction>)> {
    cfg.validate()?;
    let bytes = fs::read(kernel).map_err(|e| Error::io(kernel, e))?;
    let kernel = SynapticKernel::from_bytes(&bytes)?;
    let labels = read_labels_csv(labels)?;
    if labels.labels.len() != cfg.architecture.populations {
        return Err(Error::Dimension(format!(
            "label map has {} populations, config has {}",
            labels.labels.len(),
            cfg.architecture.populations
        )));
    }
    let net = Network::with_kernel(cfg.network_config()?, kernel)?;
    let d = &cfg.dataset;
    let cap = (d.max_test > 0).then_some(d.max_test);
    let test = load_pair(d.kind, &d.path, Split::Test, d.classes, 0, cap)?;
    let test = bin_samples(&test, &cfg.bin_spec()?)?;
    let predictions = exec::with_workers(cfg.run.workers, || predict(&net, &labels, cfg.classifier.weighting, &test))?;
    let acc = accuracy(&confusion(&predictions))?;
    Ok((acc, predictions))
}

/// Validation accuracy of `sample` after training on the first
/// `budget / max_budget` of the (shuffled) training set.
pub fn hpo_objective(
    base: &ExperimentConfig,
    data: &TaskData,
    sample: &hpo::ConfigSample,
) -> std::result::Result<f64, String> {
    let run = || -> Result<f64> {
        let cfg = base.with_assignment(&sample.params)?;
        let spec = cfg.bin_spec()?;
        let n = ((data.train.len() as u128 * sample.budget as u128).div_ceil(base.hpo.max_budget as u128) as usize)
            .clamp(1, data.train.len());
        let order = shuffled_order(data.train.len(), sample.seed);
        let subset: Vec<Sample> = order[..n].iter().map(|&i| data.train[i].clone()).collect();
        let train = bin_samples(&subset, &spec)?;
        let validation = bin_samples(&data.validation, &spec)?;
        Ok(train_and_evaluate(&cfg, &train, &validation, sample.seed)?.accuracy)
    };
    run().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoSummary {
    pub best: hpo::TrialResult,
    pub trials: usize,
    pub evaluated: usize,
}

/// Runs (or resumes) an HPO campaign; writes `campaign.jsonl`, `best.json`
/// and `best_config.toml` under `cfg.run.out_dir`.
pub fn cmd_hpo(cfg: &ExperimentConfig) -> Result<(HpoSummary, ExperimentConfig)> {
    cfg.validate()?;
    let out = &cfg.run.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let data = TaskData::load(&cfg.dataset, true)?;
    let space = default_search_space(cfg.model);
    let opts = HpoOptions {
        iterations: cfg.hpo.iterations,
        max_budget: cfg.hpo.max_budget,
        eta: cfg.hpo.eta,
        seed: cfg.run.seed,
        sampler: cfg.hpo.sampler,
    };
    let log_path = out.join("campaign.jsonl");
    let prior = hpo::CampaignLog::read(&log_path)?;
    if !prior.is_empty() {
        log::info!("resuming from {} logged trials", prior.len());
    }
    // Rewrite the valid prefix first so a torn last line cannot end up in
    // the middle of the log once new records are appended.
    let tmp = out.join("campaign.jsonl.tmp");
    let _ = fs::remove_file(&tmp);
    let mut log = hpo::CampaignLog::append(&tmp)?;
    for t in &prior {
        log.write(t)?;
    }
    drop(log);
    fs::rename(&tmp, &log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = hpo::CampaignLog::append(&log_path)?;
    let outcome = exec::with_workers(cfg.run.workers, || {
        hpo::run_optimization(
            &space,
            &opts,
            |s| hpo_objective(cfg, &data, s),
            &prior,
            |t| {
                log::info!("trial {} budget {}: {:.4}", t.trial_id, t.budget, t.objective);
                log.write(t)
            },
        )
    })?;

    let best_cfg = cfg.with_assignment(&outcome.best.config)?;
    let summary = HpoSummary {
        best: outcome.best.clone(),
        trials: outcome.history.len(),
        evaluated: outcome.evaluated,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::parse("hpo summary", e))?;
    write_file(&out.join("best.json"), format!("{json}\n").as_bytes())?;
    write_file(&out.join("best_config.toml"), best_cfg.to_toml()?.as_bytes())?;
    Ok((summary, best_cfg))
}
