//! `rss-augment`: fetch the fingerprint data, train per-room GANs and room classifiers, and run
//! the augmentation experiments.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 training failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rss_augment::experiments::Interpretation;

use config::{ConfigBuilder, Precision, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rss-augment",
    version,
    about = "GAN augmentation of WiFi RSS fingerprints for room classification"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file (see the README for the schema)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override any configuration field, e.g. `--set gan.generator_adam.beta1=0.5` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed (required by table1 and sweep)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Root directory for run outputs
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Name of this run's output directory (default: UTC timestamp)
    #[arg(long, global = true)]
    tag: Option<String>,

    /// Dataset file (default: <cache dir>/wifi_localization.txt)
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,

    /// Download URL used by `fetch`
    #[arg(long, global = true)]
    dataset_url: Option<String>,

    /// Expected SHA-256 of the dataset file
    #[arg(long, global = true)]
    sha256: Option<String>,

    /// Dataset cache directory (the RSS_AUGMENT_CACHE environment variable takes precedence)
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Worker threads for experiments (0 = one per logical core)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Floating-point precision of the networks
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,

    /// Classifier training epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// Classifier minibatch size
    #[arg(long, global = true)]
    batch_size: Option<usize>,

    /// Classifier Adam learning rate
    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    /// Classifier hidden widths, comma separated (five values)
    #[arg(long, global = true, value_delimiter = ',', value_name = "W,W,W,W,W")]
    classifier_hidden: Option<Vec<i64>>,

    /// GAN training iterations
    #[arg(long, global = true)]
    gan_iterations: Option<usize>,

    /// GAN minibatch size
    #[arg(long, global = true)]
    gan_batch_size: Option<usize>,

    /// Discriminator steps per generator step
    #[arg(long, global = true)]
    disc_steps: Option<usize>,

    /// GAN latent dimension
    #[arg(long, global = true)]
    latent_dim: Option<usize>,

    /// Leaky ReLU slope of the GAN hidden layers
    #[arg(long, global = true)]
    leaky_alpha: Option<f64>,

    /// Adam learning rate of both GAN networks
    #[arg(long, global = true)]
    gan_learning_rate: Option<f64>,

    /// Generator objective
    #[arg(long, global = true, value_enum)]
    loss_variant: Option<LossVariantArg>,

    /// Repetitions per experiment cell
    #[arg(long, global = true)]
    repetitions: Option<usize>,

    /// Use 100 repetitions per cell
    #[arg(long, global = true)]
    full: bool,

    /// How table synthetic counts are read
    #[arg(long, global = true, value_enum)]
    interpretation: Option<InterpretationArg>,

    /// Real fractions of the table, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    table_fractions: Option<Vec<f64>>,

    /// Synthetic counts of the table, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    synthetic_counts: Option<Vec<i64>>,

    /// Fraction step of the sweep, in percent (must divide 100)
    #[arg(long, global = true)]
    sweep_step: Option<u32>,

    /// Real fraction kept by train-gan and train-classifier
    #[arg(long, global = true)]
    real_fraction: Option<f64>,

    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum LossVariantArg {
    Saturating,
    NonSaturating,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum InterpretationArg {
    Totals,
    PerClass,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the dataset into the cache directory and verify its SHA-256
    Fetch,
    /// Write the seeded stratified 50/50 split and the fitted standardizer
    Split,
    /// Train per-room GANs on the (subsampled) training split
    TrainGan {
        /// Train only this room (1-based); default: every room
        #[arg(long = "class")]
        class_id: Option<usize>,
    },
    /// Draw synthetic fingerprints from a saved GAN
    Generate {
        /// GAN model written by train-gan
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Number of rows to draw
        #[arg(long)]
        count: usize,
        /// Standardizer to map rows back to dBm (default: standardizer.json next to the model)
        #[arg(long, value_name = "PATH")]
        standardizer: Option<PathBuf>,
        /// Room the model must belong to (checked when given)
        #[arg(long = "class")]
        class_id: Option<usize>,
    },
    /// Train the room classifier on the (subsampled) training split plus optional synthetic files
    TrainClassifier {
        /// Synthetic fingerprint files written by generate (repeatable)
        #[arg(long, value_name = "PATH")]
        synthetic: Vec<PathBuf>,
    },
    /// Evaluate a saved classifier on the test split
    Evaluate {
        /// Classifier model written by train-classifier
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Standardizer fitted with the model (default: standardizer.json next to the model)
        #[arg(long, value_name = "PATH")]
        standardizer: Option<PathBuf>,
    },
    /// Accuracy and log loss for each real fraction and synthetic count
    Table1,
    /// Real-only versus topped-up accuracy across real fractions
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fetch => "fetch",
            Command::Split => "split",
            Command::TrainGan { .. } => "train-gan",
            Command::Generate { .. } => "generate",
            Command::TrainClassifier { .. } => "train-classifier",
            Command::Evaluate { .. } => "evaluate",
            Command::Table1 => "table1",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(rss_augment::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        use rss_augment::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                E::Config(_) => 1,
                E::Training(_) | E::GanDiverged { .. } => 3,
                E::LayerDimension { .. }
                | E::Shape(_)
                | E::StaleCache(_)
                | E::Probability { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<rss_augment::Error> for CliError {
    fn from(e: rss_augment::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn build_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut b = ConfigBuilder::from_file(g.config.as_deref())?;
    for s in &g.set {
        b.set_assignment(s)?;
    }
    let path_str = |p: &PathBuf| p.to_string_lossy().into_owned();
    if let Some(v) = g.seed {
        let v = i64::try_from(v)
            .map_err(|_| CliError::usage("--seed must fit in a signed 64-bit integer"))?;
        b.set("seed", v)?;
    }
    if let Some(v) = &g.output_dir {
        b.set("output_dir", path_str(v))?;
    }
    if let Some(v) = &g.dataset {
        b.set("dataset.path", path_str(v))?;
    }
    if let Some(v) = &g.dataset_url {
        b.set("dataset.url", v.clone())?;
    }
    if let Some(v) = &g.sha256 {
        b.set("dataset.sha256", v.clone())?;
    }
    if let Some(v) = &g.cache_dir {
        b.set("dataset.cache_dir", path_str(v))?;
    }
    let int = |v: usize| v as i64;
    if let Some(v) = g.workers {
        b.set("workers", int(v))?;
    }
    if let Some(v) = g.precision {
        b.set("precision", if v == Precision::F32 { "f32" } else { "f64" })?;
    }
    if let Some(v) = g.epochs {
        b.set("classifier.epochs", int(v))?;
    }
    if let Some(v) = g.batch_size {
        b.set("classifier.batch_size", int(v))?;
    }
    if let Some(v) = g.learning_rate {
        b.set("classifier.adam.learning_rate", v)?;
    }
    if let Some(v) = &g.classifier_hidden {
        b.set("classifier.hidden", v.clone())?;
    }
    if let Some(v) = g.gan_iterations {
        b.set("gan.iterations", int(v))?;
    }
    if let Some(v) = g.gan_batch_size {
        b.set("gan.batch_size", int(v))?;
    }
    if let Some(v) = g.disc_steps {
        b.set("gan.disc_steps", int(v))?;
    }
    if let Some(v) = g.latent_dim {
        b.set("gan.latent_dim", int(v))?;
    }
    if let Some(v) = g.leaky_alpha {
        b.set("gan.leaky_alpha", v)?;
    }
    if let Some(v) = g.gan_learning_rate {
        b.set("gan.generator_adam.learning_rate", v)?;
        b.set("gan.discriminator_adam.learning_rate", v)?;
    }
    if let Some(v) = g.loss_variant {
        let tag = match v {
            LossVariantArg::Saturating => "saturating",
            LossVariantArg::NonSaturating => "non_saturating",
        };
        b.set("gan.loss_variant", tag)?;
    }
    if g.full {
        b.set(
            "experiment.repetitions",
            int(rss_augment::experiments::FULL_REPETITIONS),
        )?;
    }
    if let Some(v) = g.repetitions {
        if g.full {
            return Err(CliError::usage(
                "--full and --repetitions are mutually exclusive",
            ));
        }
        b.set("experiment.repetitions", int(v))?;
    }
    if let Some(v) = g.interpretation {
        let i = match v {
            InterpretationArg::Totals => Interpretation::Totals,
            InterpretationArg::PerClass => Interpretation::PerClass,
        };
        b.set("experiment.interpretation", i.tag())?;
    }
    if let Some(v) = &g.table_fractions {
        b.set("experiment.table_fractions", v.clone())?;
    }
    if let Some(v) = &g.synthetic_counts {
        b.set("experiment.synthetic_counts", v.clone())?;
    }
    if let Some(v) = g.sweep_step {
        b.set("experiment.sweep_step_percent", i64::from(v))?;
    }
    if let Some(v) = g.real_fraction {
        b.set("experiment.real_fraction", v)?;
    }
    b.build()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .init();

    let result = build_config(&cli.global).and_then(|cfg| {
        let name = cli.command.name();
        commands::run(&cli.command, name, &cfg, cli.global.tag.as_deref())
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
