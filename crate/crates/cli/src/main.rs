//! `v2xalloc`: dataset generation, training, evaluation and runtime
//! measurement from the command line.
//!
//! Every failure prints one line `error: <message>` to stderr and exits
//! with status 1. Usage errors (unknown flags, bad values) exit with 2.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use v2x_alloc::config::{ConfigError, ScenarioConfig};
use v2x_alloc::dataset::{self, Dataset, DatasetError, DEFAULT_SPLIT};
use v2x_alloc::eval::{self, EvalContext, EvalError, Instance, Method, Models, TimingMode};
use v2x_alloc::neural::{
    self, checkpoint, train::loss_trace_csv, FeatureSource, Model, NetworkKind, NetworkSpec, NeuralError, PowerDecoding,
    TrainingConfig,
};
use v2x_alloc::solvers::SolverSettings;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

#[derive(Debug, Parser)]
#[command(name = "v2xalloc", version, about = "Spectrum reuse and power allocation for hybrid V2I/V2V uplinks")]
struct Cli {
    /// Scenario config file (`key = value` lines); defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random stream of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw channel snapshots and label them with the exhaustive solver.
    Generate(GenerateArgs),
    /// Train a CNN or DNN on the feasible training split of a dataset.
    Train(TrainArgs),
    /// Score methods on the feasible test split; writes CSVs and a summary.
    Evaluate(EvalArgs),
    /// Wall-clock comparison of methods on the test split.
    Runtime(RuntimeArgs),
    /// Print a summary of a dataset directory or a model checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = DEFAULT_SPLIT)]
    split: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Cnn,
    Dnn,
}

impl From<Kind> for NetworkKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Cnn => NetworkKind::Cnn,
            Kind::Dnn => NetworkKind::Dnn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Features {
    LargeScale,
    Instantaneous,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory written by `generate`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Cnn)]
    kind: Kind,
    /// Epochs (default 100 for the CNN, 500 for the DNN).
    #[arg(long)]
    epochs: Option<usize>,
    /// Use at most this many feasible training samples.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Share of the training samples held out for a validation loss.
    #[arg(long, default_value_t = 0.0)]
    validation_fraction: f64,
    #[arg(long, value_enum, default_value_t = Features::LargeScale)]
    features: Features,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// Dataset directory; its test split supplies the instances.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// CNN checkpoint.
    #[arg(long)]
    cnn: Option<PathBuf>,
    /// DNN checkpoint.
    #[arg(long)]
    dnn: Option<PathBuf>,
    /// Methods to run (default: Benchmark, every provided model and the three baselines).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Use at most this many feasible test instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Keep learned powers continuous instead of snapping them to the solver grid.
    #[arg(long)]
    continuous_powers: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: MethodArgs,
    /// Monte-Carlo samples of the evaluation stream (default: the scenario's reporting count).
    #[arg(long)]
    mc_report: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    Parallel,
}

#[derive(Debug, Args)]
struct RuntimeArgs {
    #[command(flatten)]
    common: MethodArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Single, Mode::Parallel])]
    modes: Vec<Mode>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Dataset directory or checkpoint file.
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => generate(&cli, a),
        Command::Train(a) => train(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Runtime(a) => runtime(&cli, a),
        Command::Inspect(a) => inspect(a),
    }
}

fn load_config(cli: &Cli) -> Result<Option<ScenarioConfig>, CliError> {
    let Some(path) = &cli.config else { return Ok(None) };
    let cfg = ScenarioConfig::from_file(path)?;
    cfg.validate()?;
    Ok(Some(cfg))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|e| CliError::Write { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(path)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<(), CliError> {
    let cfg = load_config(cli)?.unwrap_or_default();
    let fractions = [a.split[0], a.split[1], a.split[2]];
    let ds = dataset::generate(&cfg, &cfg.power_grid(), a.count, cli.seed, fractions)?;
    ds.write(&cli.out)?;
    let feasible = ds.samples.iter().filter(|s| s.feasible).count();
    println!("wrote {} samples ({} feasible) to {}", ds.len(), feasible, cli.out.display());
    Ok(())
}

/// Loads the dataset and checks that an explicit `--config` describes the
/// same scenario.
fn open_dataset(cli: &Cli, path: &Option<PathBuf>) -> Result<Dataset, CliError> {
    let path = path.as_ref().ok_or_else(|| CliError::Missing("--dataset <dir> (benchmark labels)".into()))?;
    let ds = dataset::load(path)?;
    if let Some(cfg) = load_config(cli)? {
        if cfg.fingerprint() != ds.manifest.scenario_sha256 {
            return Err(CliError::Invalid(format!(
                "--config describes a different scenario than dataset {}",
                path.display()
            )));
        }
    }
    Ok(ds)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<(), CliError> {
    let ds = open_dataset(cli, &a.dataset)?;
    let kind = NetworkKind::from(a.kind);
    let split = ds.split()?;
    let mut idx: Vec<usize> = ds.feasible(&split.train).collect();
    if let Some(n) = a.samples {
        idx.truncate(n);
    }
    if idx.is_empty() {
        return Err(NeuralError::EmptyDataset.into());
    }
    let features = match a.features {
        Features::LargeScale => FeatureSource::LargeScale,
        Features::Instantaneous => FeatureSource::Instantaneous,
    };
    let normalizer = ds.fit_normalizer(&idx, features)?;
    let set = ds.training_set(&idx, features, &normalizer)?;
    let defaults = TrainingConfig::for_kind(kind);
    let config = TrainingConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        validation_fraction: a.validation_fraction,
        seed: cli.seed,
        ..defaults
    };
    let spec = NetworkSpec::for_kind(kind, ds.manifest.num_cue, ds.manifest.num_vue);
    let (network, trace) = neural::train::train_with_progress(spec, &set, &config, |r, _| {
        let val = r.validation.map_or(String::new(), |v| format!(" validation {:.5}", v.total));
        eprintln!("epoch {} loss {:.5}{}", r.epoch, r.train.total, val);
    })?;
    let model = Model {
        network,
        normalizer,
        features,
        p_max_cue_w: ds.scenario.p_max_cue_w(),
        p_max_vue_w: ds.scenario.p_max_vue_w(),
    };
    let name = kind.name().to_lowercase();
    let ckpt = write(&cli.out, &format!("{name}.ckpt"), checkpoint::to_bytes(&model))?;
    write(&cli.out, &format!("{name}_loss.csv"), loss_trace_csv(&trace))?;
    println!("trained {} on {} samples for {} epochs; checkpoint {}", kind.name(), idx.len(), config.epochs, ckpt.display());
    Ok(())
}

/// Checkpoints, method list and test instances shared by `evaluate` and
/// `runtime`.
struct Setup {
    ds: Dataset,
    cnn: Option<Model>,
    dnn: Option<Model>,
    methods: Vec<Method>,
    test: Vec<usize>,
}

fn setup(cli: &Cli, a: &MethodArgs) -> Result<Setup, CliError> {
    let ds = open_dataset(cli, &a.dataset)?;
    let load = |p: &Option<PathBuf>| -> Result<Option<Model>, CliError> {
        p.as_ref().map(checkpoint::load).transpose().map_err(CliError::from)
    };
    let (cnn, dnn) = (load(&a.cnn)?, load(&a.dnn)?);
    let methods = if a.methods.is_empty() {
        let mut m = vec![Method::Benchmark];
        m.extend(cnn.as_ref().map(|_| Method::Cnn));
        m.extend(dnn.as_ref().map(|_| Method::Dnn));
        m.extend([Method::MaxPower, Method::MinPower, Method::RandomPower]);
        m
    } else {
        a.methods
            .iter()
            .map(|s| Method::parse(s).ok_or_else(|| CliError::Invalid(format!("unknown method `{s}`"))))
            .collect::<Result<_, _>>()?
    };
    for (m, model, flag) in [(Method::Cnn, &cnn, "--cnn"), (Method::Dnn, &dnn, "--dnn")] {
        if methods.contains(&m) && model.is_none() {
            return Err(CliError::Missing(format!("{flag} <checkpoint> ({} model)", m.name())));
        }
    }
    let split = ds.split()?;
    let mut test: Vec<usize> = ds.feasible(&split.test).collect();
    if let Some(n) = a.instances {
        test.truncate(n);
    }
    if test.is_empty() {
        return Err(EvalError::NoInstances.into());
    }
    Ok(Setup { ds, cnn, dnn, methods, test })
}

impl Setup {
    fn context(&self, seed: u64, mc_report: Option<usize>, continuous: bool) -> EvalContext<'_> {
        let cfg = &self.ds.scenario;
        let grid = self.ds.manifest.grid.clone();
        EvalContext {
            params: cfg.problem_params(),
            solver: SolverSettings { mc_samples: cfg.mc_samples_solver, candidate_cap: cfg.candidate_cap },
            mc_report: mc_report.unwrap_or(cfg.mc_samples_report),
            seed,
            models: Models { cnn: self.cnn.as_ref(), dnn: self.dnn.as_ref() },
            decoding: if continuous { PowerDecoding::Continuous } else { PowerDecoding::grid(&grid) },
            grid,
        }
    }

    fn instances(&self) -> Vec<Instance<'_>> {
        self.test.iter().map(|&i| Instance { id: i, gains: &self.ds.samples[i].gains }).collect()
    }
}

fn evaluate(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let s = setup(cli, &a.common)?;
    let ctx = s.context(cli.seed, a.mc_report, a.common.continuous_powers);
    let report = eval::evaluate(&s.methods, &s.instances(), &ctx)?;
    write(&cli.out, "results.csv", report.rows_csv())?;
    write(&cli.out, "cdf.csv", report.cdf_csv())?;
    write(&cli.out, "timing.csv", report.timing_csv())?;
    write(&cli.out, "summary.txt", report.summary_text())?;
    print!("{}", report.summary_text());
    Ok(())
}

fn runtime(cli: &Cli, a: &RuntimeArgs) -> Result<(), CliError> {
    let s = setup(cli, &a.common)?;
    let ctx = s.context(cli.seed, None, a.common.continuous_powers);
    let modes: Vec<TimingMode> = a
        .modes
        .iter()
        .map(|m| match m {
            Mode::Single => TimingMode::SingleThreaded,
            Mode::Parallel => TimingMode::Parallel,
        })
        .collect();
    let rows = eval::runtime_table(&s.methods, &s.instances(), &ctx, &modes)?;
    let csv = eval::runtime_csv(&rows);
    write(&cli.out, "runtime.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn inspect(a: &InspectArgs) -> Result<(), CliError> {
    if a.path.is_dir() {
        let ds = dataset::load(&a.path)?;
        let m = &ds.manifest;
        let feasible = ds.samples.iter().filter(|s| s.feasible).count();
        println!("dataset {}", a.path.display());
        println!("samples {} ({} feasible), M = {}, N = {}", m.count, feasible, m.num_cue, m.num_vue);
        println!("base seed {}, solver mc samples {}", m.base_seed, m.mc_samples);
        println!("split sizes train/validation/test {:?}", m.split_sizes);
        println!("scenario sha256 {}", m.scenario_sha256);
    } else {
        let model = checkpoint::load(&a.path)?;
        let spec = model.network.spec();
        println!("checkpoint {}", a.path.display());
        println!("network {} for M = {}, N = {}, {} classes", spec.kind.name(), spec.num_cue, spec.num_vue, spec.num_classes);
        println!("input {:?}, {} layers, {} parameters", spec.input_shape, spec.layers.len(), model.network.param_count());
        println!("features {}", model.features.name());
    }
    Ok(())
}
