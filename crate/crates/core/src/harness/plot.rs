//! Minimal SVG line charts for metric CSVs.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::csv_error;
use crate::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// Columns to draw; all columns after the first when empty.
    pub columns: Vec<String>,
    /// Plot `log10` of the values; non-positive points are dropped.
    pub log_y: bool,
}

/// Reads a CSV whose first column is the x axis and renders the selected
/// columns as polylines. Non-finite values break nothing: they are skipped.
pub fn plot_csv(input: &Path, options: &PlotOptions) -> Result<String> {
    let mut reader = csv::Reader::from_path(input).map_err(csv_error)?;
    let headers: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(Error::Config(format!("{} needs at least two columns", input.display())));
    }
    let selected: Vec<usize> = if options.columns.is_empty() {
        (1..headers.len()).collect()
    } else {
        options
            .columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .filter(|&i| i > 0)
                    .ok_or_else(|| Error::Config(format!("no column `{c}` to plot")))
            })
            .collect::<Result<_>>()?
    };

    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); selected.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let Some(x) = record.get(0).and_then(|v| v.trim().parse::<f64>().ok()) else {
            continue;
        };
        for (k, &col) in selected.iter().enumerate() {
            let y = record.get(col).and_then(|v| v.trim().parse::<f64>().ok());
            let y = match y {
                Some(y) if options.log_y && y > 0.0 => y.log10(),
                Some(y) if !options.log_y => y,
                _ => continue,
            };
            if x.is_finite() && y.is_finite() {
                series[k].push((x, y));
            }
        }
    }
    let names: Vec<&str> = selected.iter().map(|&i| headers[i].as_str()).collect();
    Ok(render(&headers[0], &names, &series, options.log_y))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn render(x_label: &str, names: &[&str], series: &[Vec<(f64, f64)>], log_y: bool) -> String {
    let (x0, x1) = bounds(series.iter().flatten().map(|p| p.0));
    let (y0, y1) = bounds(series.iter().flatten().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    )
    .unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = x0 + f * (x1 - x0);
        let y = y0 + f * (y1 - y0);
        let y_text = if log_y { format!("1e{y:.1}") } else { format!("{y:.3e}") };
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{x:.4}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 16.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{y_text}</text>"#,
            MARGIN - 6.0,
            sy(y) + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    )
    .unwrap();
    for (k, (name, points)) in names.iter().zip(series).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !points.is_empty() {
            let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            )
            .unwrap();
        }
        let ly = MARGIN + 16.0 * k as f64;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            escape(name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
