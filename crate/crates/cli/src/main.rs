use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ifsnn::dataset::{self, DatasetKind, Split};
use ifsnn::events::{self, EventRecord};
use ifsnn::experiment::{self, ExperimentConfig};
use ifsnn::neuron::{phase_curve, NeuronModelKind, NeuronParams};
use ifsnn::synthetic::{self, SyntheticFormat, SyntheticSpec};
use ifsnn::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "ifsnn", version, about = "Integrate-and-fire spiking network experiments on event-camera data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate `repeats` independent networks.
    Train(RunArgs),
    /// Evaluate a saved kernel and label map on the test split.
    Eval(EvalArgs),
    /// Run a hyperparameter campaign (resumes from an existing log).
    Hpo(HpoArgs),
    /// Write `u, du/dt` samples of a neuron model as CSV.
    PhasePortrait(PhaseArgs),
    /// Event counts per time bin, per class, as CSV.
    Inspect(InspectArgs),
    /// Convert between N-MNIST, AEDAT 3.1 and text event files.
    Convert(ConvertArgs),
    /// Print the reference configuration with every default.
    Config,
    /// Write a synthetic two-class dataset (horizontal vs vertical bars).
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Training-sample cap (0 = whole split).
    #[arg(long)]
    max_train: Option<usize>,
    #[arg(long)]
    max_test: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model: Option<NeuronModelKind>,
    /// Dataset directory, overriding `dataset.path`.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        if let Some(v) = self.repeats {
            cfg.run.repeats = v;
        }
        if let Some(v) = self.max_train {
            cfg.dataset.max_train = v;
        }
        if let Some(v) = self.max_test {
            cfg.dataset.max_test = v;
        }
        if let Some(v) = self.workers {
            cfg.run.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.run.out_dir = v.clone();
        }
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = &self.data {
            cfg.dataset.path = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Kernel checkpoint written by `train`.
    #[arg(long)]
    kernel: PathBuf,
    /// Label map; defaults to `labels.csv` next to the kernel.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct HpoArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Distinct configurations to draw.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value = "lif")]
    model: NeuronModelKind,
    /// Take neuron parameters from this configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    u_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    u_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Constant input current.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    current: f64,
    /// EIF sharpness override.
    #[arg(long)]
    delta_t: Option<f64>,
    /// QIF curvature override.
    #[arg(long)]
    a0: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, default_value = "nmnist")]
    kind: DatasetKind,
    /// Dataset root, or a single sample file.
    path: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    split: SplitArg,
    /// Classes to report (all present when omitted).
    #[arg(long, value_delimiter = ',')]
    classes: Vec<u32>,
    /// Files read per class.
    #[arg(long, default_value_t = 10)]
    max_files: usize,
    #[arg(long, default_value_t = 1.0)]
    bin_ms: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Nmnist,
    Aedat,
    Text,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    from: Format,
    #[arg(long)]
    to: Format,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthFormat::Nmnist)]
    format: SynthFormat,
    /// Training samples per class.
    #[arg(long, default_value_t = 40)]
    train: usize,
    /// Test samples per class.
    #[arg(long, default_value_t = 20)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFormat {
    Nmnist,
    Text,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Runtime => 3,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => train(&args),
        Command::Eval(args) => eval(&args),
        Command::Hpo(args) => hpo(&args),
        Command::PhasePortrait(args) => phase_portrait(&args),
        Command::Inspect(args) => inspect(&args),
        Command::Convert(args) => convert(&args),
        Command::Config => {
            print!("{}", ExperimentConfig::reference());
            Ok(())
        }
        Command::Synth(args) => {
            let format = match args.format {
                SynthFormat::Nmnist => SyntheticFormat::Nmnist,
                SynthFormat::Text => SyntheticFormat::Text,
            };
            synthetic::write_dataset(&args.out, format, &SyntheticSpec::default(), args.train, args.test, args.seed)?;
            println!("wrote {} + {} samples per class to {}", args.train, args.test, args.out.display());
            Ok(())
        }
    }
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let report = experiment::cmd_train(&cfg)?;
    println!(
        "{} {:?}: mean accuracy {:.4} +/- {:.4}, best {:.4} over {} repeats ({})",
        report.model,
        report.classes,
        report.mean,
        report.std,
        report.best,
        report.accuracies.len(),
        cfg.run.out_dir.join("report.json").display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let labels = args
        .labels
        .clone()
        .unwrap_or_else(|| args.kernel.with_file_name("labels.csv"));
    let (acc, predictions) = experiment::cmd_eval(&cfg, &args.kernel, &labels)?;
    let out = cfg.run.out_dir.join("predictions.csv");
    write_output(Some(&out), &experiment::predictions_csv(&predictions)?)?;
    println!("accuracy {acc:.4} on {} test samples ({})", predictions.len(), out.display());
    Ok(())
}

fn hpo(args: &HpoArgs) -> Result<()> {
    let mut cfg = args.run.resolve()?;
    if let Some(n) = args.iterations {
        cfg.hpo.iterations = n;
    }
    cfg.validate()?;
    let (summary, _) = experiment::cmd_hpo(&cfg)?;
    println!(
        "best trial {} (budget {}): validation accuracy {:.4}; {} trials, {} evaluated now ({})",
        summary.best.trial_id,
        summary.best.budget,
        summary.best.objective,
        summary.trials,
        summary.evaluated,
        cfg.run.out_dir.join("best_config.toml").display()
    );
    for (k, v) in &summary.best.config {
        println!("  {k} = {v}");
    }
    Ok(())
}

fn phase_portrait(args: &PhaseArgs) -> Result<()> {
    let mut params: NeuronParams = match &args.config {
        Some(p) => ExperimentConfig::load(p)?.neuron,
        None => NeuronParams::default(),
    };
    if let Some(v) = args.delta_t {
        params.delta_t = v;
    }
    if let Some(v) = args.a0 {
        params.a0 = v;
    }
    let span = params.v_peak - params.u_rest;
    let u_min = args.u_min.unwrap_or(params.u_rest - 0.25 * span);
    let u_max = args.u_max.unwrap_or(params.v_peak);
    let curve = phase_curve(args.model, &params, u_min, u_max, args.points, args.current)?;
    let mut csv = String::from("u,du_dt\n");
    for (u, du) in curve {
        let _ = writeln!(csv, "{u},{du}");
    }
    write_output(args.out.as_deref(), csv.as_bytes())
}

fn inspect(args: &InspectArgs) -> Result<()> {
    if !(args.bin_ms.is_finite() && args.bin_ms > 0.0) {
        return Err(Error::invalid("bin-ms", "must be > 0"));
    }
    let bin_us = ((args.bin_ms * 1000.0).round() as u64).max(1);
    let mut groups: Vec<(String, Vec<Vec<EventRecord>>)> = Vec::new();
    if args.path.is_file() {
        groups.push(("file".into(), vec![dataset::decode_file(args.kind, &args.path, None)?]));
    } else {
        let split = match args.split {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        };
        let classes = if args.classes.is_empty() {
            dataset::list_classes(args.kind, &args.path, split)?
        } else {
            args.classes.clone()
        };
        for class in classes {
            let files = dataset::class_files(args.kind, &args.path, split, class)?;
            let samples = files
                .iter()
                .take(args.max_files)
                .map(|f| dataset::decode_file(args.kind, f, Some(class)))
                .collect::<Result<Vec<_>>>()?;
            groups.push((class.to_string(), samples));
        }
    }
    let mut csv = String::from("class,bin,t_start_us,samples,events\n");
    for (class, samples) in &groups {
        let counts = bin_counts(samples, bin_us);
        for (bin, n) in counts.iter().enumerate() {
            let _ = writeln!(csv, "{class},{bin},{},{},{n}", bin as u64 * bin_us, samples.len());
        }
    }
    write_output(args.out.as_deref(), csv.as_bytes())
}

/// Event totals per `bin_us` window, summed over samples. At least one row
/// per group so empty samples still show up.
fn bin_counts(samples: &[Vec<EventRecord>], bin_us: u64) -> Vec<u64> {
    let bins = samples
        .iter()
        .flatten()
        .map(|e| e.timestamp_us / bin_us + 1)
        .max()
        .unwrap_or(1) as usize;
    let mut counts = vec![0u64; bins];
    for e in samples.iter().flatten() {
        counts[(e.timestamp_us / bin_us) as usize] += 1;
    }
    counts
}

fn convert(args: &ConvertArgs) -> Result<()> {
    let events = match args.from {
        Format::Nmnist => dataset::decode_file(DatasetKind::Nmnist, &args.input, None)?,
        Format::Aedat => dataset::decode_file(DatasetKind::Gesture, &args.input, None)?,
        Format::Text => dataset::decode_file(DatasetKind::Text, &args.input, None)?,
    };
    let bytes = match args.to {
        Format::Nmnist => events::encode_nmnist(&events)?,
        Format::Aedat => events::encode_aedat(&events)?,
        Format::Text => events::write_text_events(&events).into_bytes(),
    };
    write_output(Some(&args.output), &bytes)?;
    log::info!("{} events written to {}", events.len(), args.output.display());
    Ok(())
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Error::io("<stdout>", e))
        }
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(p, bytes).map_err(|e| Error::io(p, e))
        }
    }
}
