use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{OverlayRow, PhaseGrid};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub const TRIAL_CSV_HEADER: &str = "s,m,trial,relative_error,success,iterations,converged";
pub const OVERLAY_CSV_HEADER: &str = "s,theory_fraction,theory_m,frontier_m";

pub fn write_text(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.csv` and `<stem>.pgm` and returns both paths.
pub fn emit_heatmap(grid: &PhaseGrid, stem: &Path) -> Result<Vec<PathBuf>> {
    let csv = stem.with_extension("csv");
    let pgm = stem.with_extension("pgm");
    write_text(&csv, grid.to_csv())?;
    write_text(&pgm, grid.to_pgm())?;
    Ok(vec![csv, pgm])
}

impl OverlayRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.s,
            fmt_f64(self.theory_fraction),
            fmt_f64(self.theory_m),
            self.frontier_m.map(fmt_f64).unwrap_or_default()
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Self-contained SVG line chart on an 800x600 view box. Points outside
/// `y_range` are clamped to the frame.
pub fn svg_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[PlotSeries],
    y_range: (f64, f64),
) -> String {
    const W: f64 = 800.0;
    const H: f64 = 600.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 40.0;
    const TOP: f64 = 50.0;
    const BOTTOM: f64 = 70.0;

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut x_lo, mut x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if !x_lo.is_finite() || !x_hi.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let (y_lo, mut y_hi) = y_range;
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * (W - LEFT - RIGHT);
    let py = |y: f64| {
        let y = y.clamp(y_lo, y_hi);
        H - BOTTOM - (y - y_lo) / (y_hi - y_lo) * (H - TOP - BOTTOM)
    };

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" width=\"{W}\" height=\"{H}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    out.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    ));
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            px(xv),
            H - BOTTOM + 20.0,
            tick(xv)
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            LEFT - 8.0,
            py(yv) + 4.0,
            tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        (LEFT + W - RIGHT) / 2.0,
        H - 20.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    ));
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = TOP + 20.0 + 18.0 * k as f64;
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            LEFT + 15.0,
            LEFT + 45.0,
            LEFT + 52.0,
            ly + 4.0,
            escape(&s.name)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Record of one experiment run, written as `manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub base_seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
    /// Summed per-trial solver time, when the experiment has trials.
    pub trial_time_secs: Option<f64>,
}

impl RunManifest {
    pub fn new<P: Serialize>(
        command: &str,
        parameters: &P,
        base_seed: Option<u64>,
        artifacts: Vec<String>,
        wall_clock_secs: f64,
        trial_time_secs: Option<f64>,
    ) -> Result<Self> {
        let parameters = serde_json::to_value(parameters)
            .map_err(|e| Error::invalid(format!("cannot serialize parameters: {e}")))?;
        Ok(Self {
            command: command.to_string(),
            parameters,
            base_seed,
            artifacts,
            wall_clock_secs,
            trial_time_secs,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("cannot serialize manifest: {e}")))?;
        write_text(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_viewbox_and_one_polyline_per_series() {
        let series = vec![
            PlotSeries {
                name: "a<b".into(),
                points: vec![(0.0, 0.0), (1.0, 2.0)],
            },
            PlotSeries {
                name: "c".into(),
                points: vec![(0.0, 1.0), (1.0, 0.5)],
            },
        ];
        let svg = svg_line_plot("t", "x", "y", &series, (0.0, 1.0));
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn heatmap_files() {
        let dir = tempfile::tempdir().unwrap();
        let grid = PhaseGrid {
            d: 4,
            s_values: vec![1, 2, 3],
            m_values: vec![1, 2, 3, 4],
            trials: 2,
            success_threshold: 1e-5,
            base_seed: 0,
            successes: vec![2; 12],
            rates: vec![1.0; 12],
        };
        let paths = emit_heatmap(&grid, &dir.path().join("phase")).unwrap();
        let pgm = fs::read(&paths[1]).unwrap();
        assert_eq!(&pgm[..11], b"P5\n4 3\n255\n");
        assert!(pgm[11..].iter().all(|&b| b == 0));
        let err = emit_heatmap(&grid, &dir.path().join("missing/phase")).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }
}
