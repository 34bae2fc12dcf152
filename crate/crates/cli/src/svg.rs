//! Standalone SVG stem plot of a Bragg spectrum.

use std::fmt::Write;

use quasilattice::Spectrum;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Tick spacing from {1, 2, 5} x 10^n giving at most `max_ticks` intervals.
fn tick_step(span: f64, max_ticks: usize) -> f64 {
    let raw = span / max_ticks as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn ticks(lo: f64, hi: f64, max_ticks: usize) -> Vec<f64> {
    let step = tick_step(hi - lo, max_ticks);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Vertical lines at each `k` with height equal to the intensity.
pub fn stem_plot(spectrum: &Spectrum, title: &str) -> String {
    let k_max = spectrum.k_max.max(1e-9);
    let y_max = spectrum
        .entries
        .iter()
        .map(|e| e.intensity)
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.05;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |k: f64| MARGIN_LEFT + (k + k_max) / (2.0 * k_max) * plot_w;
    let y = |v: f64| MARGIN_TOP + plot_h - v / y_max * plot_h;
    let base = y(0.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="14" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{MARGIN_TOP:.2}" x2="{MARGIN_LEFT:.2}" y2="{base:.2}" stroke="black"/>"#
    );
    for t in ticks(-k_max, k_max, 10) {
        let tx = x(t);
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{base:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            base + 5.0,
            base + 18.0,
            label(t)
        );
    }
    for t in ticks(0.0, y_max, 5) {
        let ty = y(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{MARGIN_LEFT:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            ty + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">intensity</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    // stems
    let _ = writeln!(s, r#"<g stroke="steelblue" stroke-width="1.5">"#);
    for e in &spectrum.entries {
        let k = e.k.to_f64();
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{base:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            x(k),
            x(k),
            y(e.intensity)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
