//! Static learning-curve rendering: mean lines with +-1 std bands, written
//! as standalone SVG.

use crate::metrics::{read_aggregate_csv, summarize, CurveSummary, MetricsError};
use std::fmt;
use std::path::Path;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug)]
pub enum PlotError {
    Io(std::io::Error),
    Metrics(MetricsError),
    Empty,
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlotError::Io(e) => write!(f, "plot io error: {e}"),
            PlotError::Metrics(e) => write!(f, "render error: {e}"),
            PlotError::Empty => write!(f, "render error: no curves to draw"),
        }
    }
}

impl std::error::Error for PlotError {}

impl From<std::io::Error> for PlotError {
    fn from(e: std::io::Error) -> Self {
        PlotError::Io(e)
    }
}

impl From<MetricsError> for PlotError {
    fn from(e: MetricsError) -> Self {
        PlotError::Metrics(e)
    }
}

/// One curve ready for drawing.
pub struct NamedCurve {
    pub label: String,
    pub summary: CurveSummary,
}

/// Loads aggregate CSVs into summarized curves.
pub fn load_curves(
    csvs: &[&Path],
    labels: &[String],
    eval_interval: usize,
    smooth_window: usize,
) -> Result<Vec<NamedCurve>, PlotError> {
    if csvs.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut curves = Vec::with_capacity(csvs.len());
    for (i, path) in csvs.iter().enumerate() {
        let rows = read_aggregate_csv(path)?;
        if rows.is_empty() {
            return Err(PlotError::Metrics(MetricsError::Format {
                file: path.display().to_string(),
                message: "no data rows".to_string(),
            }));
        }
        let label = labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| format!("curve {i}"))
            });
        curves.push(NamedCurve {
            label,
            summary: summarize(&rows, eval_interval, smooth_window),
        });
    }
    Ok(curves)
}

/// Renders curves to an SVG file: one mean polyline per curve plus a
/// shaded band spanning mean plus/minus one standard deviation.
pub fn render_curves(curves: &[NamedCurve], out: &Path) -> Result<(), PlotError> {
    if curves.is_empty() || curves.iter().all(|c| c.summary.episodes.is_empty()) {
        return Err(PlotError::Empty);
    }

    let x_max = curves
        .iter()
        .flat_map(|c| c.summary.episodes.iter())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for c in curves {
        for (m, s) in c.summary.mean.iter().zip(&c.summary.std) {
            y_min = y_min.min(m - s);
            y_max = y_max.max(m + s);
        }
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        return Err(PlotError::Empty);
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_px = |e: f64| MARGIN_L + e / x_max * plot_w;
    let y_px = |v: f64| MARGIN_T + (y_max - v) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n\
         <line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
        MARGIN_L,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        MARGIN_T
    ));
    // ticks
    for k in 0..=5 {
        let e = x_max * k as f64 / 5.0;
        let x = x_px(e);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{0}\" x2=\"{x:.2}\" y2=\"{1}\" stroke=\"black\"/>\n\
             <text x=\"{x:.2}\" y=\"{2}\" font-size=\"12\" text-anchor=\"middle\">{e:.0}</text>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0,
            HEIGHT - MARGIN_B + 20.0
        ));
        let v = y_min + (y_max - y_min) * k as f64 / 5.0;
        let y = y_px(v);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{y:.2}\" x2=\"{1}\" y2=\"{y:.2}\" stroke=\"black\"/>\n\
             <text x=\"{2}\" y=\"{3:.2}\" font-size=\"12\" text-anchor=\"end\">{v:.2}</text>\n",
            MARGIN_L - 5.0,
            MARGIN_L,
            MARGIN_L - 8.0,
            y + 4.0
        ));
    }
    // axis labels
    svg.push_str(&format!(
        "<text x=\"{0:.2}\" y=\"{1}\" font-size=\"14\" text-anchor=\"middle\">episodes</text>\n\
         <text x=\"18\" y=\"{2:.2}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {2:.2})\">average return</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        MARGIN_T + plot_h / 2.0
    ));

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let s = &curve.summary;
        if s.episodes.is_empty() {
            continue;
        }
        // band polygon: upper envelope forward, lower envelope back
        let mut pts = String::new();
        for k in 0..s.episodes.len() {
            pts.push_str(&format!(
                "{:.2},{:.2} ",
                x_px(s.episodes[k] as f64),
                y_px(s.mean[k] + s.std[k])
            ));
        }
        for k in (0..s.episodes.len()).rev() {
            pts.push_str(&format!(
                "{:.2},{:.2} ",
                x_px(s.episodes[k] as f64),
                y_px(s.mean[k] - s.std[k])
            ));
        }
        svg.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{color}\" opacity=\"0.18\" stroke=\"none\"/>\n",
            pts.trim_end()
        ));
        let line: Vec<String> = (0..s.episodes.len())
            .map(|k| format!("{:.2},{:.2}", x_px(s.episodes[k] as f64), y_px(s.mean[k])))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            line.join(" ")
        ));
        // legend
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly:.2}\" x2=\"{1}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"3\"/>\n\
             <text x=\"{2}\" y=\"{3:.2}\" font-size=\"13\">{4}</text>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 38.0,
            MARGIN_L + 44.0,
            ly + 4.0,
            xml_escape(&curve.label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(out, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
