//! Minimal SVG line plots.

use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct Axis {
    pub label: String,
    pub log: bool,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn transform(v: f64, log: bool) -> Option<f64> {
    let t = if log { v.log10() } else { v };
    t.is_finite().then_some(t)
}

/// Renders the series on shared axes. Points that cannot be drawn (non-finite,
/// or non-positive on a log axis) are dropped.
pub fn line_plot(title: &str, x: &Axis, y: &Axis, series: &[Series]) -> String {
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter_map(|&(a, b)| Some((transform(a, x.log)?, transform(b, y.log)?)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in all {
        x0 = x0.min(a);
        x1 = x1.max(a);
        y0 = y0.min(b);
        y1 = y1.max(b);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let px = |a: f64| MARGIN + (a - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |b: f64| H - MARGIN - (b - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3e}") };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for (v, anchor, xx, yy) in [
        (x0, "start", MARGIN, H - MARGIN + 16.0),
        (x1, "end", W - MARGIN, H - MARGIN + 16.0),
    ] {
        let _ = writeln!(out, r#"<text x="{xx}" y="{yy}" text-anchor="{anchor}">{}</text>"#, tick(v, x.log));
    }
    for (v, yy) in [(y0, H - MARGIN), (y1, MARGIN + 4.0)] {
        let _ = writeln!(out, r#"<text x="{}" y="{yy}" text-anchor="end">{}</text>"#, MARGIN - 4.0, tick(v, y.log));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
        W / 2.0,
        H - 20.0,
        escape(&x.label),
        if x.log { " (log)" } else { "" }
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&y.label),
        if y.log { " (log)" } else { "" }
    );
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !p.is_empty() {
            let d: Vec<String> = p.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
        }
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            W - MARGIN - 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_points_a_log_axis_cannot_show() {
        let s = Series {
            label: "e".into(),
            points: vec![(1.0, 1.0), (2.0, 0.0), (3.0, 0.1)],
        };
        let svg = line_plot("t", &Axis { label: "j".into(), log: false }, &Axis { label: "e".into(), log: true }, &[s]);
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
