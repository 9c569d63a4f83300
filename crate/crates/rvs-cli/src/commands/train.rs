use std::path::PathBuf;

use rvs_core::corpus::series_examples;
use rvs_core::net::{save_model, ModelSpec, PulseNet};
use rvs_core::session::read_labels;
use rvs_core::track::Profile;
use rvs_core::train::{train, TrainConfig, TrainingExample};

use super::load_series;
use crate::{log, CliError};

pub struct Args {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub profile: Profile,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub log: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, args.profile)?;
    if corpus.is_empty() {
        return Err(CliError::Input(format!(
            "no usable training windows under {}",
            args.corpus.display()
        )));
    }
    let stress = corpus.iter().filter(|e| e.stress).count();
    log::info(format!(
        "training on {} windows ({} harmonic-stress)",
        corpus.len(),
        stress
    ));

    let mut net = PulseNet::<f32>::new(ModelSpec::default_for_len(args.profile.window_samples()))?;
    net.init_weights(args.seed);
    let cfg = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        val_fraction: args.val_fraction,
        lambda_mix: 1.0,
        patience: 10,
        lr_decay_every: 45,
        lr_decay: 0.3,
    };
    let history = train(&mut net, &corpus, &cfg)?;
    save_model(&args.out, &net, args.profile.name())?;

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("train.jsonl"));
    let mut lines = String::new();
    for e in &history {
        lines.push_str(&serde_json::to_string(e)?);
        lines.push('\n');
    }
    std::fs::write(&log_path, lines)?;
    if let Some(last) = history.last() {
        log::info(format!(
            "trained {} epochs, val CE {:.3}, val MAE {:.2} bpm -> {}",
            history.len(),
            last.val_ce,
            last.val_mae_bpm,
            args.out.display()
        ));
    }
    Ok(())
}

/// Loads every `*.rvs` session under a directory (or a single session) and
/// converts eligible windows into training examples.
fn load_corpus(path: &PathBuf, profile: Profile) -> Result<Vec<TrainingExample>, CliError> {
    let mut sessions = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().map_or(false, |e| e == "rvs") {
                sessions.push(p);
            }
        }
        sessions.sort();
    } else {
        sessions.push(path.clone());
    }

    let mut corpus = Vec::new();
    for (i, session) in sessions.iter().enumerate() {
        let labels = read_labels(rvs_core::session::labels_path(session))?;
        let (header, series) = load_series(session)?;
        corpus.extend(series_examples(
            &series,
            &labels.scene,
            i as u64,
            &header.config,
            profile,
        ));
    }
    Ok(corpus)
}
