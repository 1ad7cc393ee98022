//! Minimal line plots as standalone SVG 1.1 documents.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLOURS: [&str; 6] = ["#e6831a", "#1f5fbf", "#7b3fa0", "#2a9d4b", "#555555", "#c0392b"];
const DASHES: [&str; 6] = ["", "8 4", "2 3", "10 3 2 3", "4 4", "1 2"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// Missing values break the line.
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    /// Vertical dashed reference lines.
    pub markers: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round step of 1, 2 or 5 × 10^k giving roughly `n` intervals.
fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in lo.log10().floor() as i32..=hi.log10().ceil() as i32 {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(k);
            if v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12) {
                out.push(v);
            }
        }
    }
    out
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

pub fn render(plot: &Plot) -> String {
    let xs: Vec<f64> = plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = plot.series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1)).filter(|y| y.is_finite()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let log_x = plot.log_x && x0 > 0.0;
    let fx = |x: f64| if log_x { x.ln() } else { x };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (fx(x) - fx(x0)) / (fx(x1) - fx(x0)) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&plot.title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    let xt = if log_x { log_ticks(x0, x1) } else { nice_ticks(x0, x1, 6) };
    for t in xt {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(&plot.x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    for &m in &plot.markers {
        if m >= x0 && m <= x1 && (!log_x || m > 0.0) {
            let x = sx(m);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="#d62728" stroke-dasharray="6 4"/>"##, TOP + ph);
        }
    }
    for (k, series) in plot.series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let dash = DASHES[k % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="2"{dash_attr} points="{}"/>"#, seg.join(" "));
            }
            seg.clear();
        };
        for &(x, y) in &series.points {
            match y {
                Some(y) if y.is_finite() => segment.push(format!("{:.2},{:.2}", sx(x), sy(y))),
                _ => flush(&mut segment, &mut s),
            }
        }
        flush(&mut segment, &mut s);
        let ly = TOP + 15.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"{dash_attr}/>"#, lx + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 36.0, ly + 4.0, escape(&series.name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(log_x: bool) -> Plot {
        Plot {
            title: "c & d".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x,
            series: vec![
                Series { name: "a".into(), points: vec![(0.1, Some(1.0)), (1.0, None), (10.0, Some(3.0)), (20.0, Some(2.0))] },
                Series { name: "b<".into(), points: vec![(0.1, Some(-1.0)), (20.0, Some(0.5))] },
            ],
            markers: vec![1.0, 100.0],
        }
    }

    #[test]
    fn well_formed_document() {
        let s = render(&plot(false));
        assert!(s.starts_with("<?xml"));
        assert!(s.contains(r#"version="1.1""#));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("c &amp; d") && s.contains("b&lt;"));
        // The gap splits series a; its first piece has a single point and is dropped.
        assert_eq!(s.matches("<polyline").count(), 2);
        // Only the in-range marker is drawn.
        assert_eq!(s.matches("#d62728").count(), 1);
    }

    #[test]
    fn log_axis_ticks() {
        assert_eq!(log_ticks(0.1, 20.0), vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0]);
        let s = render(&plot(true));
        assert!(s.contains(">0.5<"));
    }

    #[test]
    fn linear_ticks() {
        assert_eq!(nice_ticks(0.0, 1.0, 5), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let empty = render(&Plot::default());
        assert!(empty.contains("</svg>"));
    }
}
