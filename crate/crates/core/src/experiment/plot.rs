//! Minimal SVG line charts of sweep throughput against primary load.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::experiment::config::Mode;
use crate::experiment::metrics::MetricsRecord;
use crate::experiment::sweep::{aggregate, SweepRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 180.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One labelled polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

/// Builds one series per (mode, omega): x is the primary arrival rate
/// `1 - lambda_p`, y the replication mean of `metric`.
pub fn throughput_series(rows: &[SweepRow], metric: impl Fn(&MetricsRecord) -> f64) -> Vec<Series> {
    let mut by_series: BTreeMap<(Mode, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (key, stats) in aggregate(rows, metric) {
        by_series.entry((key.mode, key.omega().to_bits())).or_default().push((1.0 - key.lambda_p(), stats.mean));
    }
    by_series
        .into_iter()
        .map(|((mode, omega_bits), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("{mode}, w={}", f64::from_bits(omega_bits)),
                dashed: mode == Mode::NonCooperative,
                points,
            }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a line chart with both axes on `[0, 1]` unless the data exceed it.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|y| y.is_finite())
        .fold(1.0f64, f64::max);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + x.clamp(0.0, 1.0) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h * (1.0 - (y / y_max).clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_L + plot_w / 2.0, escape(title));
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (x, y) = (sx(t), sy(t * y_max));
        let _ = writeln!(svg, r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##, MARGIN_T, MARGIN_T + plot_h);
        let _ = writeln!(svg, r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, MARGIN_L, MARGIN_L + plot_w);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{t:.1}</text>"#, MARGIN_T + plot_h + 16.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.2}</text>"#, MARGIN_L - 6.0, y + 4.0, t * y_max);
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, MARGIN_L + plot_w / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let pts: Vec<String> = s.points.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#, pts.join(" "));
        for &(x, y) in s.points.iter().filter(|p| p.1.is_finite()) {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = MARGIN_T + 10.0 + 18.0 * i as f64;
        let lx = MARGIN_L + plot_w + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

/// The two standard figures: primary and secondary throughput.
pub fn sweep_figures(rows: &[SweepRow]) -> [(&'static str, String); 2] {
    let x_label = "primary arrival rate (1 - lambda_p)";
    [
        (
            "primary_throughput.svg",
            render_svg("Primary throughput", x_label, "packets per slot", &throughput_series(rows, |m| m.primary_throughput)),
        ),
        (
            "secondary_throughput.svg",
            render_svg("Secondary throughput", x_label, "packets per slot", &throughput_series(rows, |m| m.secondary_throughput)),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: Mode, omega: f64, lambda_p: f64, y: f64) -> SweepRow {
        SweepRow {
            mode,
            omega,
            lambda_p,
            replication: 0,
            seed: 0,
            metrics: MetricsRecord { primary_throughput: y, ..Default::default() },
        }
    }

    #[test]
    fn one_series_per_mode_and_weight() {
        let rows = vec![
            row(Mode::Cooperative, 0.5, 0.2, 0.7),
            row(Mode::Cooperative, 0.5, 0.8, 0.2),
            row(Mode::NonCooperative, 0.5, 0.2, 0.5),
            row(Mode::Cooperative, 0.8, 0.2, 0.6),
        ];
        let series = throughput_series(&rows, |m| m.primary_throughput);
        assert_eq!(series.len(), 3);
        let coop = &series[0];
        assert_eq!(coop.label, "cooperative, w=0.5");
        assert!((coop.points[0].0 - 0.2).abs() < 1e-12);
        assert!((coop.points[1].0 - 0.8).abs() < 1e-12);
        assert!(series.iter().any(|s| s.dashed));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let rows = vec![row(Mode::Cooperative, 0.5, 0.2, 0.7), row(Mode::NonCooperative, 0.5, 0.2, 0.5)];
        for (name, svg) in sweep_figures(&rows) {
            assert!(name.ends_with(".svg"));
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert_eq!(svg.matches("<polyline").count(), 2);
        }
    }
}
