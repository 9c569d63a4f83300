//! Self-contained SVG line chart for HR series with a truth overlay and
//! shaded undetermined spans.

use rvs_core::track::HrSeries;

pub struct PlotData<'a> {
    pub series: &'a HrSeries,
    /// (center_s, bpm) reference points.
    pub truth: Vec<(f64, f64)>,
    pub title: String,
    /// Timestamp line embedded in the file; fixed for reproducible output.
    pub stamp: String,
}

const W: f64 = 960.0;
const H: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

pub fn render(data: &PlotData) -> String {
    let est: Vec<(f64, f64)> = data
        .series
        .entries
        .iter()
        .filter_map(|e| e.bpm.map(|b| (e.center_s, b)))
        .collect();

    let xs: Vec<f64> = data
        .series
        .entries
        .iter()
        .map(|e| e.center_s)
        .chain(data.truth.iter().map(|&(t, _)| t))
        .collect();
    let ys: Vec<f64> = est
        .iter()
        .map(|&(_, b)| b)
        .chain(data.truth.iter().map(|&(_, b)| b))
        .collect();
    let (x0, x1) = span(&xs, 0.0, 60.0);
    let (y0, y1) = span(&ys, 40.0, 100.0);
    let (y0, y1) = (y0 - 5.0, y1 + 5.0);

    let px = |t: f64| MARGIN_L + (t - x0) / (x1 - x0) * (W - MARGIN_L - MARGIN_R);
    let py = |b: f64| H - MARGIN_B - (b - y0) / (y1 - y0) * (H - MARGIN_T - MARGIN_B);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!("<!-- {} -->\n", data.stamp));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        MARGIN_L, data.title
    ));

    // Shade undetermined spans.
    let step = data.series.step_s;
    for e in &data.series.entries {
        if e.bpm.is_none() {
            let xa = px(e.center_s - step / 2.0);
            let xb = px(e.center_s + step / 2.0);
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#f3d5d5\"/>\n",
                xa,
                xb - xa,
                H - MARGIN_T - MARGIN_B
            ));
        }
    }

    // Axes.
    s.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MARGIN_B,
        W - MARGIN_R,
        H - MARGIN_B
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MARGIN_B
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">time s</text>\n",
        W / 2.0,
        H - 14.0
    ));
    s.push_str(&format!(
        "<text x=\"12\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 12 {:.2})\">bpm</text>\n",
        H / 2.0,
        H / 2.0
    ));

    // Truth overlay.
    if data.truth.len() > 1 {
        let pts: Vec<String> = data
            .truth
            .iter()
            .map(|&(t, b)| format!("{:.2},{:.2}", px(t), py(b)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"/>\n",
            pts.join(" ")
        ));
    }

    // Estimate line and points.
    if est.len() > 1 {
        let pts: Vec<String> = est
            .iter()
            .map(|&(t, b)| format!("{:.2},{:.2}", px(t), py(b)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
    }
    for &(t, b) in &est {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f5fbf\"/>\n",
            px(t),
            py(b)
        ));
    }

    s.push_str("</svg>\n");
    s
}

fn span(vals: &[f64], lo_default: f64, hi_default: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() || lo == hi {
        (lo_default, hi_default)
    } else {
        (lo, hi)
    }
}
