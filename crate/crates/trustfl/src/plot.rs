//! SVG line plots drawn from the per-round CSV files.
//!
//! Plots read nothing but the CSV, so they can be regenerated from a run
//! directory without re-running the simulation.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Time-average regret against the round.
    Regret,
    /// Time-average mean constraint violation against the round.
    Violation,
}

impl Figure {
    fn column(self) -> &'static str {
        match self {
            Figure::Regret => "timeavg_regret",
            Figure::Violation => "timeavg_violation_mean",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Figure::Regret => "Time-average regret",
            Figure::Violation => "Time-average constraint violation",
        }
    }
}

/// Reads `(round, value)` pairs of one column.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Plot(format!("{}: no column `{column}`", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Plot(format!("{}: malformed row {:?}", path.display(), rec)))
        };
        out.push((parse(0)?, parse(idx)?));
    }
    Ok(out)
}

const COLORS: [RGBColor; 4] = [RGBColor(0, 90, 181), RGBColor(220, 50, 32), BLACK, RGBColor(0, 140, 70)];

/// Draws one curve per `(label, csv)` pair.
pub fn plot_from_csv(series: &[(&str, &Path)], figure: Figure, out: &Path) -> Result<()> {
    let data: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(label, p)| Ok((*label, read_column(p, figure.column())?)))
        .collect::<Result<_>>()?;
    draw(&data, figure, out).map_err(|e| CliError::Plot(format!("{}: {e}", out.display())))
}

fn draw(data: &[(&str, Vec<(f64, f64)>)], figure: Figure, out: &Path) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let points = data.iter().flat_map(|(_, s)| s.iter());
    let (mut x_max, mut y_min, mut y_max) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_max = x_max.max(x);
        if y.is_finite() {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    let pad = ((y_max - y_min) * 0.05).max(1e-9);

    let root = SVGBackend::new(out, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(figure.title(), ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(1.0..x_max, (y_min - pad)..(y_max + pad))?;
    chart
        .configure_mesh()
        .x_desc("round t")
        .y_desc(figure.title())
        .draw()?;
    for (i, (label, s)) in data.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.iter().copied(), color.stroke_width(2)))?
            .label(*label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
