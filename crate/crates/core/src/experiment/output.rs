//! CSV and SVG rendering of aggregated traces.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::ScenarioError;
use crate::metrics::{SeriesStats, TraceAggregate};

pub const CSV_HEADER: [&str; 7] = [
    "t",
    "pseudo_regret_mean",
    "pseudo_regret_std",
    "realized_regret_mean",
    "realized_regret_std",
    "collisions_per_user_mean",
    "collisions_per_user_std",
];

/// Writes one row per logged round, LF line endings.
pub fn write_csv_to<W: Write>(agg: &TraceAggregate, out: W) -> Result<(), ScenarioError> {
    if agg.is_empty() {
        return Err(ScenarioError::EmptyAggregate);
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (i, t) in agg.times.iter().enumerate() {
        let row = [
            t.to_string(),
            agg.pseudo_regret.mean[i].to_string(),
            agg.pseudo_regret.std[i].to_string(),
            agg.realized_regret.mean[i].to_string(),
            agg.realized_regret.std[i].to_string(),
            agg.collisions_per_user.mean[i].to_string(),
            agg.collisions_per_user.std[i].to_string(),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(agg: &TraceAggregate, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let file = std::fs::File::create(path)?;
    write_csv_to(agg, std::io::BufWriter::new(file))
}

pub fn write_svg(title: &str, curves: &[(&str, &TraceAggregate)], path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    if curves.iter().all(|(_, a)| a.is_empty()) {
        return Err(ScenarioError::EmptyAggregate);
    }
    std::fs::write(path, render_svg(title, curves))?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Mean and std series derived from an aggregate.
type Extract = fn(&TraceAggregate) -> (Vec<f64>, Vec<f64>);

struct Curve<'a> {
    label: &'a str,
    color: &'a str,
    times: &'a [u64],
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Standalone SVG with three stacked panels (cumulative pseudo-regret, its
/// running average, collisions per user); each curve is the mean across
/// repetitions with a shaded ±1 standard deviation band.
pub fn render_svg(title: &str, curves: &[(&str, &TraceAggregate)]) -> String {
    let panels: [(&str, Extract); 3] = [
        ("cumulative pseudo-regret", |a| plain(&a.pseudo_regret)),
        ("average pseudo-regret (cumulative / t)", |a| {
            let per_t = |v: &[f64]| v.iter().zip(&a.times).map(|(x, &t)| x / t as f64).collect();
            (per_t(&a.pseudo_regret.mean), per_t(&a.pseudo_regret.std))
        }),
        ("collisions per user", |a| plain(&a.collisions_per_user)),
    ];
    let legend_height = 20.0 * curves.len() as f64 + 10.0;
    let height = 40.0 + legend_height + PANEL_HEIGHT * panels.len() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    svg.push_str(
        "<style>text{font-family:sans-serif;font-size:11px;fill:#222}\
         .title{font-size:15px;font-weight:bold}.axis{stroke:#444;stroke-width:1;fill:none}\
         .grid{stroke:#ddd;stroke-width:0.5}.mean{fill:none;stroke-width:1.5}</style>\n",
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text class="title" x="{}" y="22">{}</text>"#, MARGIN_LEFT, escape(title));
    for (i, (label, _)) in curves.iter().enumerate() {
        let y = 40.0 + 20.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_LEFT}" y="{}" width="14" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            y,
            MARGIN_LEFT + 20.0,
            y + 9.0,
            escape(label)
        );
    }

    for (p, (name, extract)) in panels.iter().enumerate() {
        let top = 40.0 + legend_height + PANEL_HEIGHT * p as f64;
        let data: Vec<Curve> = curves
            .iter()
            .enumerate()
            .filter(|(_, (_, a))| !a.is_empty())
            .map(|(i, (label, a))| {
                let (mean, std) = extract(a);
                Curve { label, color: PALETTE[i % PALETTE.len()], times: &a.times, mean, std }
            })
            .collect();
        panel(&mut svg, top, name, &data);
    }
    svg.push_str("</svg>\n");
    svg
}

fn plain(s: &SeriesStats) -> (Vec<f64>, Vec<f64>) {
    (s.mean.clone(), s.std.clone())
}

fn panel(svg: &mut String, top: f64, name: &str, curves: &[Curve]) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = top + MARGIN_TOP;
    let y1 = top + PANEL_HEIGHT - MARGIN_BOTTOM;

    let t_max = curves.iter().filter_map(|c| c.times.last()).max().copied().unwrap_or(1).max(1) as f64;
    let v_max = curves.iter().flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m + s)).fold(0.0f64, f64::max);
    let v_min = curves.iter().flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m - s)).fold(0.0f64, f64::min);
    let v_span = if v_max > v_min { v_max - v_min } else { 1.0 };
    let sx = |t: f64| x0 + (x1 - x0) * t / t_max;
    let sy = |v: f64| y1 - (y1 - y0) * (v - v_min) / v_span;

    let _ = writeln!(svg, r#"<text x="{x0}" y="{}">{}</text>"#, top + 18.0, escape(name));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (gx, gy) = (x0 + (x1 - x0) * f, y1 - (y1 - y0) * f);
        let _ = writeln!(
            svg,
            r#"<line class="grid" x1="{gx:.1}" y1="{y0:.1}" x2="{gx:.1}" y2="{y1:.1}"/><line class="grid" x1="{x0:.1}" y1="{gy:.1}" x2="{x1:.1}" y2="{gy:.1}"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{gx:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            y1 + 15.0,
            tick(t_max * f),
            x0 - 5.0,
            gy + 4.0,
            tick(v_min + v_span * f)
        );
    }
    let _ =
        writeln!(svg, r#"<rect class="axis" x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}"/>"#, x1 - x0, y1 - y0);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#, (x0 + x1) / 2.0, y1 + 32.0);

    for c in curves {
        let upper = c.times.iter().zip(c.mean.iter().zip(&c.std)).map(|(&t, (m, s))| (sx(t as f64), sy(m + s)));
        let lower = c.times.iter().zip(c.mean.iter().zip(&c.std)).rev().map(|(&t, (m, s))| (sx(t as f64), sy(m - s)));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let line: Vec<String> =
            c.times.iter().zip(&c.mean).map(|(&t, &m)| format!("{:.1},{:.1}", sx(t as f64), sy(m))).collect();
        let _ = writeln!(
            svg,
            r#"<g><title>{}</title><polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/><polyline class="mean" points="{}" stroke="{}"/></g>"#,
            escape(c.label),
            band.join(" "),
            c.color,
            line.join(" "),
            c.color
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".to_string()
    } else if !(1e-2..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
