//! Render latency-vs-payload charts from `results.csv`, one line per chain
//! length, medians over delivered repetitions, log-log axes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use plotters::prelude::*;

#[derive(Debug, Clone)]
struct ResultRow {
    chain_length: u32,
    payload_bytes: u64,
    delivered: bool,
    latency_ms: f64,
}

fn parse_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 8 {
            continue;
        }
        rows.push(ResultRow {
            chain_length: fields[1].parse().unwrap_or(0),
            payload_bytes: fields[2].parse().unwrap_or(0),
            delivered: fields[6] == "true",
            latency_ms: fields[7].parse().unwrap_or(f64::NAN),
        });
    }
    Ok(rows)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(values[values.len() / 2])
}

/// Draw the chart to an SVG file.
pub fn plot_latency(results_csv: &Path, out_svg: &Path) -> Result<()> {
    let rows = parse_results(results_csv)?;
    anyhow::ensure!(!rows.is_empty(), "no rows in {}", results_csv.display());

    // (chain_length, payload) -> median latency over delivered reps
    let mut grouped: BTreeMap<u32, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.delivered && r.latency_ms.is_finite()) {
        grouped
            .entry(row.chain_length)
            .or_default()
            .entry(row.payload_bytes)
            .or_default()
            .push(row.latency_ms);
    }
    anyhow::ensure!(!grouped.is_empty(), "no delivered repetitions to plot");

    let mut series: Vec<(u32, Vec<(f64, f64)>)> = Vec::new();
    let mut x_range = (f64::MAX, f64::MIN);
    let mut y_range = (f64::MAX, f64::MIN);
    for (chain, by_payload) in &grouped {
        let mut points = Vec::new();
        for (payload, latencies) in by_payload {
            if let Some(med) = median(latencies.clone()) {
                let x = *payload as f64;
                points.push((x, med));
                x_range = (x_range.0.min(x), x_range.1.max(x));
                y_range = (y_range.0.min(med), y_range.1.max(med));
            }
        }
        series.push((*chain, points));
    }

    if let Some(parent) = out_svg.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let root = SVGBackend::new(out_svg, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Bundle transmission time", ("sans-serif", 28))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(64)
        .build_cartesian_2d(
            (x_range.0 * 0.8..x_range.1 * 1.2).log_scale(),
            (y_range.0 * 0.8..y_range.1 * 1.2).log_scale(),
        )?;
    chart
        .configure_mesh()
        .x_desc("payload size [bytes]")
        .y_desc("median latency [ms]")
        .draw()?;

    let palette = [&BLUE, &RED, &GREEN, &MAGENTA, &CYAN, &BLACK];
    for (i, (chain, points)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        chart
            .draw_series(LineSeries::new(points.clone(), color))?
            .label(format!("{} nodes ({} hops)", chain, chain - 1))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        chart.draw_series(points.iter().map(|&(x, y)| Circle::new((x, y), 3, color.filled())))?;
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw()?;
    root.present()?;
    Ok(())
}
