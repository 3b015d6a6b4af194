//! Minimal static SVG emitters for histogram panels and box plots.

use super::{BoxStats, ParamHistogram};
use std::fmt::Write;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 42.0;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

/// One panel per parameter: gray prior band, colored posterior bars, red
/// dashed truth line.
pub fn histogram_panels_svg(params: &[ParamHistogram], color: &str, title: &str) -> String {
    let cols = 3usize;
    let rows = params.len().div_ceil(cols);
    let total_w = cols as f64 * PANEL_W;
    let total_h = rows as f64 * PANEL_H + 24.0;
    let mut s = header(total_w, total_h);
    let _ = writeln!(s, "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">{}</text>", total_w / 2.0, title);

    for (i, p) in params.iter().enumerate() {
        let x0 = (i % cols) as f64 * PANEL_W + MARGIN;
        let y0 = (i / cols) as f64 * PANEL_H + 24.0 + 18.0;
        let plot_w = PANEL_W - 1.6 * MARGIN;
        let plot_h = PANEL_H - 2.2 * MARGIN;
        let lo = p.edges[0];
        let hi = *p.edges.last().unwrap();
        let bins = p.frequencies.len();
        let fmax = p.frequencies.iter().cloned().fold(0.0f64, f64::max).max(1e-9);
        let uniform = 1.0 / bins as f64;
        let scale = plot_h / fmax.max(uniform * 1.2);

        // prior band (uniform density over the range)
        let uy = y0 + plot_h - uniform * scale;
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{uy:.2}\" width=\"{plot_w:.2}\" height=\"{:.2}\" fill=\"#cccccc\" opacity=\"0.6\"/>",
            uniform * scale
        );
        // posterior bars
        for (b, &f) in p.frequencies.iter().enumerate() {
            if f <= 0.0 {
                continue;
            }
            let bx = x0 + b as f64 / bins as f64 * plot_w;
            let bh = f * scale;
            let _ = writeln!(
                s,
                "<rect x=\"{bx:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"{color}\" opacity=\"0.85\"/>",
                y0 + plot_h - bh,
                plot_w / bins as f64 - 0.5
            );
        }
        // truth marker
        if let Some(t) = p.truth {
            if t >= lo && t <= hi {
                let tx = x0 + (t - lo) / (hi - lo) * plot_w;
                let _ = writeln!(
                    s,
                    "<line x1=\"{tx:.2}\" y1=\"{y0:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"red\" stroke-dasharray=\"4,3\" stroke-width=\"1.5\"/>",
                    y0 + plot_h
                );
            }
        }
        // frame and labels
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{} (std ratio {:.2})</text>",
            x0 + plot_w / 2.0,
            y0 + plot_h + 16.0,
            p.name,
            p.std_reduction
        );
        let _ = writeln!(
            s,
            "<text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"9\">{lo:.3}</text>",
            y0 + plot_h + 28.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{hi:.3}</text>",
            x0 + plot_w,
            y0 + plot_h + 28.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped box plots (P10/P25/P50/P75/P90 convention).
pub fn boxplot_svg(groups: &[(String, BoxStats)], title: &str, y_label: &str) -> String {
    let w = 120.0 * groups.len() as f64 + 2.0 * MARGIN;
    let h = 300.0;
    let mut s = header(w, h);
    let _ = writeln!(s, "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">{}</text>", w / 2.0, title);
    let plot_h = h - 2.0 * MARGIN - 20.0;
    let y0 = MARGIN + 10.0;
    let vmax = groups.iter().map(|(_, b)| b.p90).fold(0.0f64, f64::max).max(1e-9) * 1.15;
    let ymap = |v: f64| y0 + plot_h - v / vmax * plot_h;

    for (g, (label, b)) in groups.iter().enumerate() {
        let cx = MARGIN + 60.0 + 120.0 * g as f64;
        let bw = 46.0;
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{:.2}\" x2=\"{cx}\" y2=\"{:.2}\" stroke=\"black\"/>", ymap(b.p90), ymap(b.p75));
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{:.2}\" x2=\"{cx}\" y2=\"{:.2}\" stroke=\"black\"/>", ymap(b.p25), ymap(b.p10));
        for p in [b.p90, b.p10] {
            let _ = writeln!(s, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>", cx - bw / 4.0, ymap(p), cx + bw / 4.0, ymap(p));
        }
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bw}\" height=\"{:.2}\" fill=\"#9ecae1\" stroke=\"black\"/>",
            cx - bw / 2.0,
            ymap(b.p75),
            (ymap(b.p25) - ymap(b.p75)).max(0.5)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"orange\" stroke-width=\"2\"/>",
            cx - bw / 2.0,
            ymap(b.p50),
            cx + bw / 2.0,
            ymap(b.p50)
        );
        let _ = writeln!(
            s,
            "<text x=\"{cx}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>",
            y0 + plot_h + 18.0
        );
    }
    // y axis
    let _ = writeln!(s, "<line x1=\"{MARGIN}\" y1=\"{y0}\" x2=\"{MARGIN}\" y2=\"{:.2}\" stroke=\"black\"/>", y0 + plot_h);
    for frac in [0.0, 0.5, 1.0] {
        let v = vmax * frac;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"9\">{v:.3}</text>",
            MARGIN - 4.0,
            ymap(v) + 3.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{:.2}\" transform=\"rotate(-90 12 {:.2})\" text-anchor=\"middle\">{y_label}</text>",
        y0 + plot_h / 2.0,
        y0 + plot_h / 2.0
    );
    s.push_str("</svg>\n");
    s
}
