use std::path::PathBuf;

use rvs_core::config::RadarConfig;
use rvs_core::corpus::{sample_scene, SceneKind};
use rvs_core::scene::{gen_ground_truth, synth_adc, synth_decimated, SceneSpec};
use rvs_core::session::{write_labels, write_session, LabelFile, SessionPayload, SESSION_VERSION};
use rvs_core::track::Profile;

use super::parallel_map;
use crate::{log, CliError};

pub struct Args {
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub random_corpus: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub stress_fraction: f64,
    pub duration: f64,
    pub profile: Profile,
    pub seed: Option<u64>,
    pub payload: String,
    pub jobs: Option<usize>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let config = RadarConfig::default();
    match (&args.spec, args.random_corpus) {
        (Some(spec_path), None) => {
            let out = args
                .out
                .clone()
                .ok_or_else(|| CliError::Input("--out is required with --spec".into()))?;
            let text = std::fs::read_to_string(spec_path)?;
            let mut scene: SceneSpec = serde_json::from_str(&text)?;
            if let Some(seed) = args.seed {
                scene.seed = seed;
            }
            simulate_one(&scene, &config, &out, &args)?;
            log::info(format!("wrote {}", out.display()));
            Ok(())
        }
        (None, Some(count)) => {
            let dir = args
                .out_dir
                .clone()
                .ok_or_else(|| CliError::Input("--out-dir is required with --random-corpus".into()))?;
            std::fs::create_dir_all(&dir)?;
            let master = args.seed.unwrap_or(1);
            let results = parallel_map(count, args.jobs, |i| {
                let kind = if (i as f64 + 0.5) / count as f64 <= args.stress_fraction {
                    SceneKind::HarmonicStress
                } else {
                    SceneKind::Normal
                };
                let scene = sample_scene(master, i as u64, kind, args.profile, args.duration);
                let out = dir.join(format!("scene_{i:04}.rvs"));
                simulate_one(&scene, &config, &out, &args).map(|_| out)
            });
            for r in results {
                let path = r?;
                log::debug(format!("wrote {}", path.display()));
            }
            log::info(format!("wrote {count} sessions to {}", dir.display()));
            Ok(())
        }
        _ => Err(CliError::Input(
            "pass exactly one of --spec or --random-corpus".into(),
        )),
    }
}

fn simulate_one(
    scene: &SceneSpec,
    config: &RadarConfig,
    out: &PathBuf,
    args: &Args,
) -> Result<(), CliError> {
    let payload = match args.payload.as_str() {
        "decimated" => SessionPayload::Decimated(synth_decimated(scene, config)?),
        "adc" => SessionPayload::Adc(synth_adc(scene, config)?),
        other => {
            return Err(CliError::Input(format!(
                "unknown payload kind '{other}' (use decimated|adc)"
            )))
        }
    };
    write_session(out, config, &payload)?;

    let truth = gen_ground_truth(
        scene,
        config,
        (args.profile.window_s(), args.profile.step_s()),
    )?;
    let labels = LabelFile {
        version: SESSION_VERSION,
        scene: scene.clone(),
        profile: args.profile,
        window_s: args.profile.window_s(),
        step_s: args.profile.step_s(),
        windows: truth.windows,
    };
    write_labels(rvs_core::session::labels_path(out), &labels)?;
    Ok(())
}
