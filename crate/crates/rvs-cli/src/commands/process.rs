use std::path::PathBuf;

use rvs_core::frontend::{clutter_filter, combine_power};
use rvs_core::net::load_model;
use rvs_core::pipeline::{process_series, process_series_baseline, window_slots};
use rvs_core::session::RunConfig;
use rvs_core::track::Profile;

use super::{load_series, write_hr_csv};
use crate::{log, CliError};

pub struct Args {
    pub session: PathBuf,
    pub model: PathBuf,
    pub profile: Option<Profile>,
    pub out: PathBuf,
    pub raw_out: Option<PathBuf>,
    pub dump_power: Option<PathBuf>,
    pub dump_micromotion: Option<PathBuf>,
    pub baseline: bool,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let (header, series) = load_series(&args.session)?;
    let (mut net, manifest) = load_model(&args.model)?;
    let profile = match args.profile {
        Some(p) => p,
        None => manifest
            .profile
            .parse()
            .map_err(|e: String| CliError::Model(e))?,
    };
    if net.spec.input_len != profile.window_samples() {
        return Err(CliError::Model(format!(
            "model input length {} does not fit the {} profile window of {} samples",
            net.spec.input_len,
            profile.name(),
            profile.window_samples()
        )));
    }
    let run = RunConfig::for_profile(profile);
    let f0 = header.config.center_frequency();

    let (raw, post) = if args.baseline {
        process_series_baseline(&series, &run, f0)?
    } else {
        process_series(&series, &mut net, &run, f0)?
    };
    write_hr_csv(&args.out, &post)?;
    if let Some(raw_path) = &args.raw_out {
        write_hr_csv(raw_path, &raw)?;
    }
    log::info(format!(
        "processed {} windows -> {}",
        post.entries.len(),
        args.out.display()
    ));

    if let Some(path) = &args.dump_power {
        let filtered = clutter_filter(&series).map_err(|e| CliError::Input(e.to_string()))?;
        let image = combine_power(&filtered);
        let mut text = String::new();
        for t in 0..image.len {
            let row: Vec<String> = image.row(t).iter().map(|p| format!("{p}")).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }

    if let Some(path) = &args.dump_micromotion {
        // Last analyzable window, one column per bin.
        let slots = window_slots(&series, profile);
        let Some(&slot) = slots.last() else {
            return Err(CliError::Input("session shorter than one window".into()));
        };
        let analysis = rvs_core::pipeline::analyze_window(&series, slot, &run, f0)?;
        match analysis.motions {
            Some(motions) => {
                let mut text = motions
                    .bin_indices
                    .iter()
                    .map(|b| format!("bin_{b}"))
                    .collect::<Vec<_>>()
                    .join(",");
                text.push('\n');
                for i in 0..motions.waveforms[0].len() {
                    let row: Vec<String> = motions
                        .waveforms
                        .iter()
                        .map(|w| format!("{}", w[i]))
                        .collect();
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                std::fs::write(path, text)?;
            }
            None => {
                return Err(CliError::Input(
                    "no micro-motion available: user absent or moving in the last window".into(),
                ))
            }
        }
    }
    Ok(())
}
