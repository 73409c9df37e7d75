//! Output emission: CSV with a `#`-prefixed metadata echo and 12 significant
//! digit numeric formatting, plus a dependency-free SVG line chart.

use std::io::Write;
use std::path::Path;

use crate::config::{CliError, ExperimentConfig};
use crate::experiments::SweepResult;

/// Formats with 12 significant digits, trimming trailing zeros (printf `%g`
/// style: scientific notation outside [1e-4, 1e12)).
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..12).contains(&exp) {
        let s = format!("{:.11e}", x);
        let (mantissa, exponent) = s.split_once('e').expect("exponential format");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    } else {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

fn render_csv(res: &SweepResult) -> String {
    let mut out = String::new();
    for (key, value) in &res.metadata {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    let header: Vec<&str> = res.columns.iter().map(|(name, _)| name.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let rows = res.columns.first().map_or(0, |(_, v)| v.len());
    for i in 0..rows {
        let row: Vec<String> = res.columns.iter().map(|(_, v)| fmt_g(v[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One polyline per non-x column, x = first column. Fixed palette, no
/// external assets.
fn render_svg(res: &SweepResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 48.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        W - 2.0 * M,
        H - 2.0 * M
    ));

    if res.columns.len() >= 2 && res.columns[0].1.len() >= 2 {
        let xs = &res.columns[0].1;
        let (x_min, x_max) = min_max(xs);
        let ys_all: Vec<f64> = res.columns[1..]
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let (y_min, y_max) = min_max(&ys_all);
        let x_span = (x_max - x_min).max(1e-300);
        let y_span = (y_max - y_min).max(1e-300);
        let px = |x: f64| M + (x - x_min) / x_span * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y_min) / y_span * (H - 2.0 * M);

        for (k, (name, ys)) in res.columns[1..].iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let points: Vec<String> = xs
                .iter()
                .zip(ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                points.join(" ")
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
                M + 6.0,
                M + 16.0 + 14.0 * k as f64,
                xml_escape(name)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#444\">{}</text>\n",
            W / 2.0 - 12.0,
            H - M / 3.0,
            xml_escape(&res.columns[0].0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Writes the CSV to `--out` (or stdout) and, on request, an SVG chart next
/// to it with the extension swapped.
pub fn emit(cfg: &ExperimentConfig, res: &SweepResult) -> Result<(), CliError> {
    let csv = render_csv(res);
    match &cfg.out {
        Some(path) => {
            write_file(path, &csv)?;
            if cfg.svg {
                let svg_path = path.with_extension("svg");
                write_file(&svg_path, &render_svg(res))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
