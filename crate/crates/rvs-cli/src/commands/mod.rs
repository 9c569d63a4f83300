pub mod eval;
pub mod plot;
pub mod process;
pub mod simulate;
pub mod train;

use std::path::Path;

use rvs_core::config::RangeProfileSeries;
use rvs_core::frontend::preprocess;
use rvs_core::session::{read_session, SessionHeader, SessionPayload};
use rvs_core::track::{HrEntry, HrSeries, Profile};

use crate::CliError;

/// Loads a session and yields decimated range profiles, preprocessing raw
/// ADC payloads on the fly.
pub fn load_series(path: &Path) -> Result<(SessionHeader, RangeProfileSeries), CliError> {
    let (header, payload) = read_session(path)?;
    let series = match payload {
        SessionPayload::Decimated(series) => series,
        SessionPayload::Adc(cube) => {
            preprocess(&cube).map_err(|e| CliError::Input(e.to_string()))?
        }
    };
    Ok((header, series))
}

/// HR series CSV: one row per window. The time column is the emission time
/// (window end); undetermined rows keep an empty bpm cell.
pub fn write_hr_csv(path: &Path, series: &HrSeries) -> Result<(), CliError> {
    let mut out = String::from("time_s,bpm,confidence,determined\n");
    let half_window = series.profile.window_s() / 2.0;
    for e in &series.entries {
        let time = e.center_s + half_window;
        match e.bpm {
            Some(bpm) => out.push_str(&format!("{},{},{},true\n", time, bpm, e.confidence)),
            None => out.push_str(&format!("{},,{},false\n", time, e.confidence)),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a CSV written by [`write_hr_csv`].
pub fn read_hr_csv(path: &Path, profile: Profile) -> Result<HrSeries, CliError> {
    let text = std::fs::read_to_string(path)?;
    let half_window = profile.window_s() / 2.0;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(CliError::Input(format!("bad CSV row {i}: {line}")));
        }
        let time: f64 = cols[0]
            .parse()
            .map_err(|_| CliError::Input(format!("bad time in row {i}")))?;
        let bpm = if cols[1].is_empty() {
            None
        } else {
            Some(
                cols[1]
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad bpm in row {i}")))?,
            )
        };
        let confidence: f64 = cols[2].parse().unwrap_or(0.0);
        entries.push(HrEntry {
            center_s: time - half_window,
            bpm,
            confidence,
        });
    }
    Ok(HrSeries {
        entries,
        step_s: profile.step_s(),
        profile,
    })
}

/// Splits `0..n` into roughly equal chunks and runs `work` on a few threads,
/// collecting results in index order.
pub fn parallel_map<T, F>(n: usize, jobs: Option<usize>, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        })
        .clamp(1, 8)
        .min(n.max(1));
    if threads <= 1 {
        return (0..n).map(work).collect();
    }
    let mut results: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let work = &work;
        let mut rest: &mut [Option<T>] = &mut results;
        let chunk = n.div_ceil(threads);
        let mut start = 0;
        while start < n {
            let take = chunk.min(n - start);
            let (here, tail) = rest.split_at_mut(take);
            rest = tail;
            let base = start;
            scope.spawn(move || {
                for (k, slot) in here.iter_mut().enumerate() {
                    *slot = Some(work(base + k));
                }
            });
            start += take;
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}
