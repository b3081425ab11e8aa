//! Log-scale SVG plots of sweep results, one series per variant.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::config::{resolve_axis, Quantity};
use crate::sweep::SweepResult;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Display scale and label of the axis: frequencies in kHz, times in µs.
fn axis_display(axis: &str) -> (f64, String) {
    match resolve_axis(axis) {
        Some((_, Quantity::Frequency)) => (1.0 / (std::f64::consts::TAU * 1e3), format!("{axis} (kHz)")),
        Some((_, Quantity::Time)) => (1e6, format!("{axis} (µs)")),
        _ => (1.0, axis.to_string()),
    }
}

/// Renders `result` as SVG text. Points with non-positive or non-finite values are left out.
pub fn render_svg(result: &SweepResult) -> Result<String, PlotError> {
    let (xscale, xlabel) = axis_display(&result.axis);
    let series = result.series();
    if series.is_empty() {
        return Err(PlotError::Empty("no variants"));
    }
    let usable: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(n, pts)| {
            let kept = pts.into_iter().filter(|&(x, y)| x.is_finite() && y.is_finite() && y > 0.0);
            (n, kept.map(|(x, y)| (x * xscale, y)).collect())
        })
        .collect();
    let all: Vec<(f64, f64)> = usable.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        return Err(PlotError::Empty("no positive finite values"));
    }

    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(x, _)| (a.min(x), b.max(x)));
    if x0 == x1 {
        let pad = if x0 == 0.0 { 1.0 } else { x0.abs() * 0.1 };
        x0 -= pad;
        x1 += pad;
    }
    let (ymin, ymax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, y)| (a.min(y), b.max(y)));
    let d0 = ymin.log10().floor() as i32;
    let mut d1 = ymax.log10().ceil() as i32;
    if d1 == d0 {
        d1 += 1;
    }

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (d1 as f64 - y.log10()) / (d1 - d0) as f64 * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{} vs {}</text>"#,
        LEFT + pw / 2.0,
        esc(result.observable.name()),
        esc(&result.axis)
    );

    for d in d0..=d1 {
        let y = TOP + (d1 - d) as f64 / (d1 - d0) as f64 * ph;
        let _ = writeln!(s, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
    }
    for i in 0..=4 {
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        let x = sx(xv);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#eeeeee"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(xv));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        esc(&xlabel)
    );

    for (k, (name, pts)) in usable.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if pts.len() >= 2 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(s, r#"<circle cx="{lx:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 10.0, esc(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the plot of `result` to `path`.
pub fn emit_plot(result: &SweepResult, path: &Path) -> Result<(), PlotError> {
    let svg = render_svg(result)?;
    std::fs::write(path, svg)?;
    Ok(())
}
