use std::path::PathBuf;

use rvs_core::session::read_labels;
use rvs_core::track::Profile;

use super::read_hr_csv;
use crate::{log, svg, CliError};

pub struct Args {
    pub series: PathBuf,
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
    pub profile: Profile,
    pub fixed_epoch: bool,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let series = read_hr_csv(&args.series, args.profile)?;
    let truth: Vec<(f64, f64)> = match &args.labels {
        Some(path) => {
            let labels = read_labels(path)?;
            labels
                .windows
                .iter()
                .filter_map(|w| w.bpm.map(|b| (w.center_s, b)))
                .collect()
        }
        None => Vec::new(),
    };

    let stamp = if args.fixed_epoch {
        "generated-at: epoch 0".to_string()
    } else {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("generated-at: {now}")
    };
    let data = svg::PlotData {
        series: &series,
        truth,
        title: format!(
            "{} HR — {} windows",
            args.profile.name(),
            series.entries.len()
        ),
        stamp,
    };
    std::fs::write(&args.out, svg::render(&data))?;

    // The underlying numbers next to the figure.
    let csv_path = args.out.with_extension("csv");
    let mut text = String::from("center_s,estimate_bpm,truth_bpm\n");
    for e in &series.entries {
        let truth_here = data
            .truth
            .iter()
            .find(|(t, _)| (t - e.center_s).abs() < 1e-6)
            .map(|&(_, b)| b);
        text.push_str(&format!(
            "{},{},{}\n",
            e.center_s,
            e.bpm.map(|b| b.to_string()).unwrap_or_default(),
            truth_here.map(|b| b.to_string()).unwrap_or_default()
        ));
    }
    std::fs::write(&csv_path, text)?;
    log::info(format!(
        "wrote {} and {}",
        args.out.display(),
        csv_path.display()
    ));
    Ok(())
}
