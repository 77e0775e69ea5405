//! SVG plots and the data tables behind them.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use strider_core::kinodyn::BodyGroup;
use strider_core::trainer::{read_metrics, MetricsRow};

use crate::error::{CliError, CliResult};
use crate::eval::EvaluationReport;
use crate::io::{fmt_f64, write_atomic, write_csv};

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Other(format!("{}: plotting failed: {e}", path.display()))
}

/// Renders `series` as an SVG line chart at `path`.
pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> CliResult<()> {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(42)
            .y_label_area_size(64)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| plot_err(path, e))?;
        chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(|e| plot_err(path, e))?;
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(|e| plot_err(path, e))?
                .label(s.name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            if pts.len() <= 32 {
                chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(|e| plot_err(path, e))?;
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(path, e))?;
        root.present().map_err(|e| plot_err(path, e))?;
    }
    write_atomic(path, svg.as_bytes())
}

/// Writes the columns of `series` (sharing x values) as a CSV table.
fn table(path: &Path, x_name: &str, xs: &[f64], columns: &[(&str, Vec<f64>)]) -> CliResult<()> {
    let mut header = vec![x_name.to_string()];
    header.extend(columns.iter().map(|c| c.0.to_string()));
    let rows: Vec<Vec<String>> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| std::iter::once(fmt_f64(*x)).chain(columns.iter().map(|c| fmt_f64(c.1[i]))).collect())
        .collect();
    write_csv(path, &header, &rows)
}

fn series_of(xs: &[f64], columns: &[(&str, Vec<f64>)]) -> Vec<Series> {
    columns
        .iter()
        .map(|(n, ys)| Series { name: n.to_string(), points: xs.iter().copied().zip(ys.iter().copied()).collect() })
        .collect()
}

/// Learning-curve and curriculum-trace plots plus tables from metrics rows.
pub fn plot_metrics(rows: &[MetricsRow], out: &Path) -> CliResult<Vec<PathBuf>> {
    let xs: Vec<f64> = rows.iter().map(|r| r.iteration as f64).collect();
    let learning = [
        ("mean_reward", rows.iter().map(|r| r.mean_reward).collect::<Vec<_>>()),
        ("mean_tracking", rows.iter().map(|r| r.mean_tracking).collect()),
    ];
    let curriculum = [
        ("v_max", rows.iter().map(|r| r.v_max).collect::<Vec<_>>()),
        ("cycle_time", rows.iter().map(|r| r.cycle_time).collect()),
    ];
    let mut written = Vec::new();
    for (stem, title, y, cols) in [
        ("learning_curve", "Learning curve", "per-step value", &learning),
        ("curriculum", "Curriculum trace", "v_max (m/s) / cycle time (s)", &curriculum),
    ] {
        let csv = out.join(format!("{stem}.csv"));
        let svg = out.join(format!("{stem}.svg"));
        table(&csv, "iteration", &xs, cols)?;
        line_chart(&svg, title, "iteration", y, &series_of(&xs, cols))?;
        written.extend([csv, svg]);
    }
    Ok(written)
}

/// Velocity-tracking and momentum-decomposition plots plus tables from a report.
pub fn plot_report(report: &EvaluationReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    let xs: Vec<f64> = report.rows.iter().map(|r| r.command).collect();
    let tracking = vec![
        ("commanded", xs.clone()),
        ("mean_velocity", report.rows.iter().map(|r| r.mean_velocity).collect::<Vec<_>>()),
        ("velocity_std", report.rows.iter().map(|r| r.velocity_std).collect()),
        ("fall_rate", report.rows.iter().map(|r| r.fall_rate).collect()),
    ];
    let mut momentum: Vec<(&str, Vec<f64>)> = vec![("total", report.rows.iter().map(|r| r.mean_abs_lz).collect())];
    for g in BodyGroup::ALL {
        momentum.push((g.name(), report.rows.iter().map(|r| r.group_abs_lz[g.index()]).collect()));
    }
    let mut written = Vec::new();
    let csv = out.join("velocity_tracking.csv");
    let svg = out.join("velocity_tracking.svg");
    table(&csv, "command", &xs, &tracking)?;
    line_chart(&svg, "Velocity tracking", "commanded velocity (m/s)", "velocity (m/s)", &series_of(&xs, &tracking[..2]))?;
    written.extend([csv, svg]);
    let csv = out.join("momentum_decomposition.csv");
    let svg = out.join("momentum_decomposition.svg");
    table(&csv, "command", &xs, &momentum)?;
    line_chart(&svg, "Yaw angular momentum by body group", "commanded velocity (m/s)", "mean |L_z| (kg m^2/s)", &series_of(&xs, &momentum))?;
    written.extend([csv, svg]);
    Ok(written)
}

/// Plots every `metrics.csv` and `report.json` found in `dir` or its direct
/// subdirectories, writing into a `plots/` directory next to each input.
pub fn cmd_plot(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let mut candidates = vec![dir.to_path_buf()];
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    candidates.extend(subdirs);
    let mut written = Vec::new();
    for d in candidates {
        let metrics = d.join("metrics.csv");
        if metrics.exists() {
            let rows = read_metrics(&metrics)?;
            written.extend(plot_metrics(&rows, &d.join("plots"))?);
        }
        if d.join("report.json").exists() {
            let report = EvaluationReport::read(&d)?;
            written.extend(plot_report(&report, &d.join("plots"))?);
        }
    }
    if written.is_empty() {
        return Err(CliError::Usage(format!(
            "no inputs to plot: expected {} or {} (or either in a subdirectory)",
            dir.join("metrics.csv").display(),
            dir.join("report.json").display()
        )));
    }
    Ok(written)
}
