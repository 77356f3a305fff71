//! The `gazefuse` command line: one subcommand per pipeline stage.
//!
//! Stages run in order `sync → sample → featurize → dataset build → dataset
//! split → dataset balance → train → eval → predict → export-timeline`, each
//! reading its predecessor's artifacts from the output directory. The config
//! file comes from `--config`, else `$GAZEFUSE_CONFIG`, else `./gazefuse.toml`;
//! flags override its values.

pub mod config;
pub mod fixture;
pub mod project;
pub mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{Paths, ProjectConfig, CONFIG_ENV, DEFAULT_CONFIG_FILE};
pub use fixture::{fixture_config, generate_fixture, FixtureSpec};
pub use project::{manifest_path, Project, MANIFEST_MAGIC, MANIFEST_VERSION};
pub use stages::EvalOutput;

use crate::error::{Error, Result};
use crate::Task;

#[derive(Debug, Parser)]
#[command(name = "gazefuse", version, about = "Dual-view mutual gaze and joint attention pipeline")]
pub struct Cli {
    /// Project config (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Sessions or seeds processed in parallel.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic fixture project into a directory.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        seconds: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the parent-minus-infant audio offset per session.
    Sync {
        #[arg(long)]
        max_lag_s: Option<f64>,
        #[arg(long)]
        min_confidence: Option<f64>,
    },
    /// Pair frames on the infant clock and drop ticks without good heads.
    Sample {
        #[arg(long)]
        rate_hz: Option<f64>,
        #[arg(long)]
        min_head_confidence: Option<f64>,
    },
    /// Fill the feature store from the paired frames.
    Featurize {
        #[arg(long, value_enum, default_value_t = Backbone::Toy)]
        backbone: Backbone,
    },
    Dataset {
        #[command(subcommand)]
        action: DatasetCommand,
    },
    /// Train one model per seed.
    Train {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score every seed's checkpoint on the balanced test set and aggregate.
    Eval {
        #[command(flatten)]
        task: TaskArg,
    },
    /// Write test-split probabilities of one seed's checkpoint.
    Predict {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a prediction CSV produced elsewhere.
    ImportPredictions {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        task: TaskArg,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Write review timelines (text and SVG) for sessions, held-out ones by default.
    ExportTimeline {
        #[arg(long)]
        session: Vec<String>,
    },
    /// Measure inference throughput.
    Bench {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Label every paired frame from the annotations.
    Build {
        #[command(flatten)]
        task: TaskArg,
    },
    /// Temporal train/validation split plus held-out test sessions.
    Split {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long, value_delimiter = ',')]
        held_out: Option<Vec<String>>,
        #[arg(long)]
        val_fraction: Option<f64>,
    },
    /// Undersample the test split to equal classes.
    Balance {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct TaskArg {
    /// `mg` or `ja`; every configured task when absent.
    #[arg(long)]
    pub task: Option<Task>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Backbone {
    Toy,
}

fn config_path(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG_FILE))
}

fn open_project(path: &Path, workers: Option<usize>, tweak: impl FnOnce(&mut ProjectConfig)) -> Result<Project> {
    let mut cfg = ProjectConfig::load(path)?;
    tweak(&mut cfg);
    let base = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Project::new(cfg, base, workers)
}

/// Runs one parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let cfg_path = config_path(cli.config);
    let workers = cli.workers;
    let open = |tweak: &dyn Fn(&mut ProjectConfig)| open_project(&cfg_path, workers, tweak);
    match cli.command {
        Command::Fixture { out, seconds, seed } => {
            let spec = FixtureSpec {
                duration_s: seconds,
                seed,
                ..FixtureSpec::default()
            };
            generate_fixture(&out, &spec)?;
            println!("fixture written to {}", out.display());
        }
        Command::Sync { max_lag_s, min_confidence } => {
            let p = open(&|c| {
                c.sync.max_lag_s = max_lag_s.unwrap_or(c.sync.max_lag_s);
                c.sync.min_confidence = min_confidence.unwrap_or(c.sync.min_confidence);
            })?;
            stages::sync(&p)?;
        }
        Command::Sample { rate_hz, min_head_confidence } => {
            let p = open(&|c| {
                c.sample.rate_hz = rate_hz.unwrap_or(c.sample.rate_hz);
                c.sample.min_head_confidence = min_head_confidence.unwrap_or(c.sample.min_head_confidence);
            })?;
            stages::sample(&p)?;
        }
        Command::Featurize { backbone: Backbone::Toy } => {
            stages::featurize(&open(&|_| {})?)?;
        }
        Command::Dataset { action } => match action {
            DatasetCommand::Build { task } => {
                let p = open(&|_| {})?;
                for t in p.tasks(task.task) {
                    stages::dataset_build(&p, t)?;
                }
            }
            DatasetCommand::Split { task, held_out, val_fraction } => {
                let p = open(&|c| {
                    if let Some(h) = &held_out {
                        c.sessions.held_out = h.clone();
                    }
                    c.split.val_fraction = val_fraction.unwrap_or(c.split.val_fraction);
                })?;
                for t in p.tasks(task.task) {
                    stages::dataset_split(&p, t)?;
                }
            }
            DatasetCommand::Balance { task, seed } => {
                let p = open(&|c| c.split.balance_seed = seed.unwrap_or(c.split.balance_seed))?;
                for t in p.tasks(task.task) {
                    stages::dataset_balance(&p, t)?;
                }
            }
        },
        Command::Train { task, seeds, epochs } => {
            let p = open(&|c| {
                if let Some(s) = &seeds {
                    c.seeds = s.clone();
                }
                c.train.max_epochs = epochs.unwrap_or(c.train.max_epochs);
            })?;
            for t in p.tasks(task.task) {
                stages::train(&p, t)?;
            }
        }
        Command::Eval { task } => {
            let p = open(&|_| {})?;
            for t in p.tasks(task.task) {
                stages::eval(&p, t)?;
            }
        }
        Command::Predict { task, seed } => {
            let p = open(&|_| {})?;
            for t in p.tasks(task.task) {
                stages::predict(&p, t, seed)?;
            }
        }
        Command::ImportPredictions { input, task, threshold } => {
            let p = open(&|_| {})?;
            stages::import_predictions(&p, &input, &p.tasks(task.task), threshold)?;
        }
        Command::ExportTimeline { session } => {
            let p = open(&|_| {})?;
            let sessions = if !session.is_empty() {
                session
            } else if !p.cfg.sessions.held_out.is_empty() {
                p.cfg.sessions.held_out.clone()
            } else {
                p.cfg.sessions.all.clone()
            };
            stages::export_timelines(&p, &sessions)?;
        }
        Command::Bench { task, seed, batch_size } => {
            let p = open(&|_| {})?;
            for t in p.tasks(task.task) {
                stages::bench(&p, t, seed, batch_size)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Input(e.to_string()))?;
    execute(cli)
}

/// Entry point of the binary: exit status 0 iff the command succeeded.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
