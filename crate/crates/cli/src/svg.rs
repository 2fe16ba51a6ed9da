//! Static SVG line charts of probe series on log-log axes.

use std::fmt::Write;

use serde_json::Value;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const SERIES: [(&str, &str); 3] =
    [("tv_distance", "#1f77b4"), ("window_seminorm", "#d62728"), ("leak_mass", "#2ca02c")];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `log10` of the positive finite values of `column`, paired with `log10 t`.
fn series(points: &[Value], column: &str) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter_map(|p| {
            let t = p.get("t")?.as_f64()?;
            let v = p.get(column)?.as_f64()?;
            (t > 0.0 && v > 0.0 && v.is_finite()).then(|| (t.log10(), v.log10()))
        })
        .collect()
}

pub fn line_chart(title: &str, points: &[Value]) -> String {
    let all: Vec<Vec<(f64, f64)>> = SERIES.iter().map(|(c, _)| series(points, c)).collect();
    let flat: Vec<(f64, f64)> = all.iter().flatten().copied().collect();
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    if flat.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &flat {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">log10 t in [{x0:.2}, {x1:.2}], log10 value in [{y0:.2}, {y1:.2}]</text>"#,
        H - 16.0
    );
    for (k, ((name, colour), pts)) in SERIES.iter().zip(&all).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, d.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}">{name}</text>"#,
            W - PAD - 110.0,
            PAD + 14.0 * k as f64
        );
    }
    out.push_str("</svg>\n");
    out
}
