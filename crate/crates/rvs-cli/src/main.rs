//! `rvs` — radar vital-signs toolkit.
//!
//! Subcommands: `simulate` synthesizes scenes into session containers with
//! ground-truth labels; `process` runs the HR pipeline over a session;
//! `train` fits the pulse network on a corpus of simulated sessions; `eval`
//! scores the pipeline (and the BPF baseline) against labels; `plot` renders
//! an HR series against its reference as SVG.
//!
//! Exit codes: 0 success, 2 input error, 3 model error, 4 alignment error.

mod commands;
mod log;
mod svg;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use rvs_core::track::Profile;

#[derive(Parser)]
#[command(name = "rvs", version, about = "Radar vital-signs toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene (or a random corpus) into session containers.
    Simulate {
        /// Scene specification JSON; omit when using --random-corpus.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output session path (single-scene mode).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generate this many random scenes into --out-dir.
        #[arg(long)]
        random_corpus: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Fraction of harmonic-stress scenes in a random corpus.
        #[arg(long, default_value_t = 0.35)]
        stress_fraction: f64,
        /// Scene duration for random corpora, seconds.
        #[arg(long, default_value_t = 92.0)]
        duration: f64,
        #[arg(long, value_parser = clap::value_parser!(Profile))]
        profile: Option<Profile>,
        /// Overrides the seed in the scene spec / seeds the corpus.
        #[arg(long)]
        seed: Option<u64>,
        /// Payload kind: decimated range profiles (default) or raw ADC.
        #[arg(long, default_value = "decimated")]
        payload: String,
        /// Worker threads for corpus generation.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the HR pipeline over a session and write the HR series CSV.
    Process {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(Profile))]
        profile: Option<Profile>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the raw (pre-postprocessing) series.
        #[arg(long)]
        raw_out: Option<PathBuf>,
        /// Diagnostic dump of the combined power range image.
        #[arg(long)]
        dump_power: Option<PathBuf>,
        /// Diagnostic dump of the last window's micro-motion waveforms.
        #[arg(long)]
        dump_micromotion: Option<PathBuf>,
        /// Use the BPF baseline instead of the network.
        #[arg(long)]
        baseline: bool,
    },
    /// Train the pulse network on a directory of simulated sessions.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(Profile), default_value = "sleep")]
        profile: Profile,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.15)]
        val_fraction: f64,
        /// Training log (JSON lines); defaults to `<out>.train.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score the pipeline (and baseline) against session labels.
    Eval {
        /// Session file or directory of sessions.
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(Profile))]
        profile: Option<Profile>,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV rendering of the report table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Skip the BPF baseline row.
        #[arg(long)]
        no_baseline: bool,
        /// Restrict to the harmonic-stress subset.
        #[arg(long)]
        stress_only: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render an HR series CSV (plus labels) as an SVG chart.
    Plot {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(Profile), default_value = "sleep")]
        profile: Profile,
        /// Embed a fixed timestamp so output is byte-reproducible.
        #[arg(long)]
        fixed_epoch: bool,
    },
}

/// Error category -> process exit code.
pub enum CliError {
    Input(String),
    Model(String),
    Alignment(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(_) => 3,
            CliError::Alignment(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Model(m) | CliError::Alignment(m) => m,
        }
    }
}

impl From<rvs_core::session::SessionError> for CliError {
    fn from(e: rvs_core::session::SessionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<rvs_core::scene::SceneError> for CliError {
    fn from(e: rvs_core::scene::SceneError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<rvs_core::net::NetError> for CliError {
    fn from(e: rvs_core::net::NetError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<rvs_core::train::TrainError> for CliError {
    fn from(e: rvs_core::train::TrainError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<rvs_core::track::TrackError> for CliError {
    fn from(e: rvs_core::track::TrackError) -> Self {
        match e {
            rvs_core::track::TrackError::Misaligned => CliError::Alignment(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<rvs_core::pipeline::PipelineError> for CliError {
    fn from(e: rvs_core::pipeline::PipelineError) -> Self {
        match e {
            rvs_core::pipeline::PipelineError::Net(n) => CliError::Model(n.to_string()),
            rvs_core::pipeline::PipelineError::Track(t) => t.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            spec,
            out,
            random_corpus,
            out_dir,
            stress_fraction,
            duration,
            profile,
            seed,
            payload,
            jobs,
        } => commands::simulate::run(commands::simulate::Args {
            spec,
            out,
            random_corpus,
            out_dir,
            stress_fraction,
            duration,
            profile: profile.unwrap_or(Profile::Sleep),
            seed,
            payload,
            jobs,
        }),
        Command::Process {
            session,
            model,
            profile,
            out,
            raw_out,
            dump_power,
            dump_micromotion,
            baseline,
        } => commands::process::run(commands::process::Args {
            session,
            model,
            profile,
            out,
            raw_out,
            dump_power,
            dump_micromotion,
            baseline,
        }),
        Command::Train {
            corpus,
            out,
            profile,
            epochs,
            batch,
            lr,
            seed,
            val_fraction,
            log,
        } => commands::train::run(commands::train::Args {
            corpus,
            out,
            profile,
            epochs,
            batch,
            lr,
            seed,
            val_fraction,
            log,
        }),
        Command::Eval {
            sessions,
            model,
            profile,
            out,
            csv,
            no_baseline,
            stress_only,
            jobs,
        } => commands::eval::run(commands::eval::Args {
            sessions,
            model,
            profile,
            out,
            csv,
            no_baseline,
            stress_only,
            jobs,
        }),
        Command::Plot {
            series,
            labels,
            out,
            profile,
            fixed_epoch,
        } => commands::plot::run(commands::plot::Args {
            series,
            labels,
            out,
            profile,
            fixed_epoch,
        }),
    };

    if let Err(e) = result {
        eprintln!("rvs: error: {}", e.message());
        std::process::exit(e.code());
    }
}
