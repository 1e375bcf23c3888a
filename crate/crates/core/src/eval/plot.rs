//! Minimal SVG charts: a precision-recall curve and a labelled bar chart.

use std::fmt::Write as _;

use super::metrics::PrPoint;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{y}\" x2=\"{x}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ly}\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">{yl}</text>",
        y = H - PAD,
        x = W - PAD,
        cx = W / 2.0,
        ly = H - 12.0,
        cy = H / 2.0,
        xl = escape(x_label),
        yl = escape(y_label),
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = H - PAD - v * (H - 2.0 * PAD);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>", PAD - 4.0, y + 4.0);
    }
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Precision against recall, one polyline per named curve.
pub fn pr_curve_svg(curves: &[(&str, &[PrPoint])]) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let mut s = frame("Precision-recall", "recall", "precision");
    let (pw, ph) = (W - 2.0 * PAD, H - 2.0 * PAD);
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.1},{:.1}", PAD + p.recall * pw, H - PAD - p.precision * ph))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            path.join(" "),
            W - PAD - 100.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One bar per `(label, value)`, values in `[0, 1]`.
pub fn bar_chart_svg(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let mut s = frame(title, "", y_label);
    let (pw, ph) = (W - 2.0 * PAD, H - 2.0 * PAD);
    let slot = pw / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let v = v.clamp(0.0, 1.0);
        let x = PAD + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#4c72b0\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.3}</text>",
            H - PAD - v * ph,
            slot * 0.7,
            v * ph,
            x + slot * 0.35,
            H - PAD + 14.0,
            escape(label),
            x + slot * 0.35,
            H - PAD - v * ph - 4.0,
        );
    }
    s.push_str("</svg>\n");
    s
}
