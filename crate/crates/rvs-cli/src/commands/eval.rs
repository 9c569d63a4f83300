use std::path::PathBuf;

use rvs_core::corpus::is_harmonic_stress;
use rvs_core::net::load_model;
use rvs_core::pipeline::{
    evaluation_pairs, metrics_from_pairs, process_series, process_series_baseline,
};
use rvs_core::scene::gen_ground_truth;
use rvs_core::session::{read_labels, RunConfig};
use rvs_core::track::{MetricsReport, Profile};

use super::load_series;
use crate::{log, CliError};

pub struct Args {
    pub sessions: PathBuf,
    pub model: PathBuf,
    pub profile: Option<Profile>,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
    pub no_baseline: bool,
    pub stress_only: bool,
    pub jobs: Option<usize>,
}

struct EvalReport {
    profile: String,
    sessions: usize,
    pipeline: MetricsReport,
    baseline: Option<MetricsReport>,
}

impl EvalReport {
    fn to_json(&self) -> Result<String, serde_json::Error> {
        let mut root = serde_json::Map::new();
        root.insert("profile".into(), serde_json::Value::String(self.profile.clone()));
        root.insert("sessions".into(), serde_json::Value::from(self.sessions));
        root.insert("pipeline".into(), serde_json::to_value(&self.pipeline)?);
        if let Some(b) = &self.baseline {
            root.insert("baseline".into(), serde_json::to_value(b)?);
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(root))
    }
}

pub fn run(args: Args) -> Result<(), CliError> {
    let mut sessions = Vec::new();
    if args.sessions.is_dir() {
        for entry in std::fs::read_dir(&args.sessions)? {
            let p = entry?.path();
            if p.extension().map_or(false, |e| e == "rvs") {
                sessions.push(p);
            }
        }
        sessions.sort();
    } else {
        sessions.push(args.sessions.clone());
    }
    if sessions.is_empty() {
        return Err(CliError::Input("no sessions to evaluate".into()));
    }

    let (_, manifest) = load_model(&args.model)?;
    let profile = match args.profile {
        Some(p) => p,
        None => manifest
            .profile
            .parse()
            .map_err(|e: String| CliError::Model(e))?,
    };
    let run = RunConfig::for_profile(profile);

    // Sessions are independent; each worker loads its own copy of the model.
    let results = super::parallel_map(sessions.len(), args.jobs, |i| {
        eval_one(&sessions[i], &args.model, profile, &run, args.no_baseline, args.stress_only)
    });

    let mut pipe_pairs = Vec::new();
    let mut base_pairs = Vec::new();
    let mut used = 0usize;
    for r in results {
        let (p, b, counted) = r?;
        pipe_pairs.extend(p);
        base_pairs.extend(b);
        used += counted;
    }

    let pipeline = metrics_from_pairs(&pipe_pairs)?;
    let baseline = if args.no_baseline {
        None
    } else {
        Some(metrics_from_pairs(&base_pairs)?)
    };
    let report = EvalReport {
        profile: profile.name().to_string(),
        sessions: used,
        pipeline,
        baseline,
    };

    std::fs::write(&args.out, report.to_json()?)?;
    if let Some(csv_path) = &args.csv {
        let mut text =
            String::from("method,mae_bpm,ae95_bpm,mape,ape95,r2,recall,n_samples\n");
        let row = |name: &str, m: &MetricsReport| {
            format!(
                "{},{},{},{},{},{},{},{}\n",
                name, m.mae_bpm, m.ae95_bpm, m.mape, m.ape95, m.r2, m.recall, m.n_samples
            )
        };
        if let Some(b) = &report.baseline {
            text.push_str(&row("bpf", b));
        }
        text.push_str(&row("pipeline", &report.pipeline));
        std::fs::write(csv_path, text)?;
    }
    log::info(format!(
        "evaluated {} sessions: pipeline MAE {:.2} bpm, recall {:.2}",
        used, report.pipeline.mae_bpm, report.pipeline.recall
    ));
    Ok(())
}

type PairSet = Vec<(Option<f64>, f64)>;

fn eval_one(
    session: &PathBuf,
    model: &PathBuf,
    profile: Profile,
    run: &RunConfig,
    no_baseline: bool,
    stress_only: bool,
) -> Result<(PairSet, PairSet, usize), CliError> {
    let labels = read_labels(rvs_core::session::labels_path(session))?;
    if stress_only && !is_harmonic_stress(&labels.scene.track) {
        return Ok((Vec::new(), Vec::new(), 0));
    }
    let (header, series) = load_series(session)?;
    let truth = gen_ground_truth(
        &labels.scene,
        &header.config,
        (profile.window_s(), profile.step_s()),
    )?;
    let f0 = header.config.center_frequency();
    let (mut net, _) = load_model(model)?;
    let (_, post) = process_series(&series, &mut net, run, f0)?;
    let pipe = evaluation_pairs(&post, &truth.windows)?;
    let base = if no_baseline {
        Vec::new()
    } else {
        let (_, post_b) = process_series_baseline(&series, run, f0)?;
        evaluation_pairs(&post_b, &truth.windows)?
    };
    Ok((pipe, base, 1))
}
