//! Minimal SVG charts: horizontal bars and line plots on the unit square.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const ROW: f64 = 22.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Horizontal bar chart, one bar per label, drawn in the given order.
/// Negative values are drawn as zero-length bars.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let label_w = 200.0;
    let plot_w = WIDTH - label_w - 80.0;
    let height = 50.0 + ROW * labels.len() as f64 + 20.0;
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { plot_w / max } else { 0.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = 40.0 + ROW * i as f64;
        let w = (v.max(0.0) * scale).max(0.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            y + 14.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{label_w}" y="{}" width="{w:.3}" height="{}" fill="#1f77b4"/>"##,
            y + 3.0,
            ROW - 6.0
        );
        let _ = writeln!(s, r#"<text x="{:.3}" y="{}">{}</text>"#, label_w + w + 4.0, y + 14.0, fmt_num(v));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Overlaid polylines on `[0,1] x [0,1]` axes, e.g. ROC or PR curves.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], diagonal: bool) -> String {
    let (left, top, size) = (60.0, 40.0, 400.0);
    let legend_x = left + size + 20.0;
    let height = top + size + 50.0;
    let px = |x: f64| left + x.clamp(0.0, 1.0) * size;
    let py = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * size;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + size / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>"#);
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, px(v), top + size + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, left - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + size / 2.0, top + size + 36.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + size / 2.0,
        top + size / 2.0,
        escape(y_label)
    );
    if diagonal {
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
            px(0.0),
            py(0.0),
            px(1.0),
            py(1.0)
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{legend_x}" y="{}" width="12" height="12" fill="{color}"/>"#, ly - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, legend_x + 18.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_chart_has_one_rect_per_label() {
        let svg = bar_chart("t", &["a".into(), "b<".into()], &[1.0, 0.5]);
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains("b&lt;"));
    }

    #[test]
    fn line_plot_is_deterministic() {
        let series = vec![("m".to_string(), vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])];
        assert_eq!(line_plot("roc", "x", "y", &series, true), line_plot("roc", "x", "y", &series, true));
    }
}
