//! Static SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::Serialize;

/// A series of `(x, y)` points with axis labels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Horizontal reference line, e.g. the TVLA threshold.
    pub threshold: Option<f64>,
}

impl Curve {
    pub fn new(title: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Curve {
        Curve {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, t: f64) -> Curve {
        self.threshold = Some(t);
        self
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record([&self.x_label, &self.y_label])?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Renders `curve` as a self-contained SVG document.
pub fn render_svg(curve: &Curve) -> Result<String> {
    ensure!(!curve.points.is_empty(), "cannot plot an empty curve");
    let (x0, x1) = range(curve.points.iter().map(|p| p.0));
    let (y0, y1) = range(curve.points.iter().map(|p| p.1).chain(curve.threshold));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(&curve.title)
    )?;
    let (bx, by) = (H - BOTTOM, LEFT);
    writeln!(
        s,
        r#"<line class="axis" x1="{LEFT}" y1="{bx}" x2="{}" y2="{bx}" stroke="black"/>"#,
        W - RIGHT
    )?;
    writeln!(
        s,
        r#"<line class="axis" x1="{by}" y1="{TOP}" x2="{by}" y2="{bx}" stroke="black"/>"#
    )?;
    writeln!(
        s,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(&curve.x_label)
    )?;
    writeln!(
        s,
        r#"<text class="y-label" x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (TOP + bx) / 2.0,
        (TOP + bx) / 2.0,
        escape(&curve.y_label)
    )?;
    for (v, x, y, anchor) in [
        (x0, sx(x0), bx + 16.0, "start"),
        (x1, sx(x1), bx + 16.0, "end"),
    ] {
        writeln!(
            s,
            r#"<text class="tick" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{v:.3}</text>"#
        )?;
    }
    for v in [y0, y1] {
        writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 6.0,
            sy(v) + 4.0
        )?;
    }
    if let Some(t) = curve.threshold {
        writeln!(
            s,
            r##"<line class="threshold" x1="{LEFT}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#c0392b" stroke-dasharray="6 4" data-y="{t}"/>"##,
            sy(t),
            W - RIGHT
        )?;
    }
    let path: Vec<String> = curve
        .points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    writeln!(
        s,
        r##"<polyline class="series" fill="none" stroke="#1f4e99" stroke-width="1.5" points="{}"/>"##,
        path.join(" ")
    )?;
    for &(x, y) in &curve.points {
        if x.is_finite() && y.is_finite() {
            writeln!(
                s,
                r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e99" data-x="{x}" data-y="{y}"/>"##,
                sx(x),
                sy(y)
            )?;
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `curve` as an SVG file.
pub fn emit_plot(curve: &Curve, path: &Path) -> Result<()> {
    let svg = render_svg(curve)?;
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}

/// Recovers the data points of a plot written by [`emit_plot`].
pub fn parse_points(svg: &str) -> Vec<(f64, f64)> {
    fn attr(line: &str, name: &str) -> Option<f64> {
        let start = line.find(name)? + name.len();
        let end = start + line[start..].find('"')?;
        line[start..end].parse().ok()
    }
    svg.lines()
        .filter(|l| l.starts_with("<circle"))
        .filter_map(|l| Some((attr(l, "data-x=\"")?, attr(l, "data-y=\"")?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let c = Curve::new("one", "x", "y", vec![(1.0, 2.0)]);
        let svg = render_svg(&c).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("threshold"));
    }

    #[test]
    fn threshold_line() {
        let c = Curve::new("tvla", "traces", "max |t|", vec![(2.0, 1.0), (3.0, 6.0)])
            .with_threshold(4.5);
        let svg = render_svg(&c).unwrap();
        assert!(svg.contains(r#"<line class="threshold""#));
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![(2.0, 0.1), (3.0, -0.333333333333), (1e4, 1.0 / 3.0)];
        let svg = render_svg(&Curve::new("a < b", "n", "rank", pts.clone())).unwrap();
        assert_eq!(parse_points(&svg), pts);
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn empty_rejected() {
        assert!(render_svg(&Curve::new("", "", "", vec![])).is_err());
    }
}
