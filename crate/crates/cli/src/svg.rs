//! Minimal static SVG line charts.

use std::fmt::Write;

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];
const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub values: Vec<f64>,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
    /// Horizontal reference lines (e.g. bounds), drawn dashed.
    pub guides: Vec<f64>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + hi.abs()) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn panel(out: &mut String, p: &Panel, x: &[f64], y0: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (xmin, xmax) = range(x.iter().copied());
    let (ymin, ymax) = range(
        p.series
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .chain(p.guides.iter().copied()),
    );
    let sx = |v: f64| MARGIN_LEFT + (v - xmin) / (xmax - xmin) * plot_w;
    let sy = |v: f64| y0 + MARGIN_TOP + (ymax - v) / (ymax - ymin) * plot_h;
    let top = y0 + MARGIN_TOP;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        y0 + 20.0,
        p.title
    );
    let step = nice_step(ymax - ymin);
    let mut tick = (ymin / step).ceil() * step;
    while tick <= ymax {
        let y = sy(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            format_tick(tick, step)
        );
        tick += step;
    }
    let xstep = nice_step(xmax - xmin);
    let mut xt = (xmin / xstep).ceil() * xstep;
    while xt <= xmax {
        let xv = sx(xt);
        let _ = writeln!(
            out,
            r#"<text x="{xv:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            top + plot_h + 16.0,
            format_tick(xt, xstep)
        );
        xt += xstep;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">t [s]</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        top + plot_h + 34.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" font-size="12" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        p.y_label
    );
    for g in &p.guides {
        let y = sy(*g);
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#888" stroke-dasharray="5,4"/>"##,
            MARGIN_LEFT + plot_w
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(xv, yv)| format!("{:.2},{:.2}", sx(*xv), sy(*yv)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            s.label
        );
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

/// Stacks the panels vertically over a shared time axis.
pub fn stacked_chart(x: &[f64], panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, x, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
