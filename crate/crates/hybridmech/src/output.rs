//! CSV and JSON writers. Floats use the shortest round-trip decimal form so
//! that identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use hybridmech_core::flow::HybridTrajectory;
use hybridmech_core::impacts::ImpactEvent;
use hybridmech_core::stats::DensityGrid;
use serde::Serialize;

use crate::error::CliResult;

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn phase_header(prefix: &str, names: &[String]) -> Vec<String> {
    names
        .iter()
        .map(|n| format!("{prefix}{n}"))
        .chain(names.iter().map(|n| format!("{prefix}p_{n}")))
        .collect()
}

/// One row per accepted step: time, arc index, then the phase state.
pub fn write_trajectory(path: &Path, traj: &HybridTrajectory, names: &[String]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "arc".to_string()];
    header.extend(phase_header("", names));
    w.write_record(&header)?;
    for arc in &traj.arcs {
        for (t, x) in arc.times.iter().zip(&arc.states) {
            let mut row = vec![num(*t), arc.id.to_string()];
            row.extend(x.iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per impact with pre- and post-impact states. Multipliers are
/// joined with ';' in a single column.
pub fn write_events(path: &Path, events: &[ImpactEvent], names: &[String]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["index", "time", "surface", "label", "dwell", "grazing", "epsilon", "lambda"].iter().map(|s| s.to_string()).collect();
    header.extend(phase_header("pre_", names));
    header.extend(phase_header("post_", names));
    w.write_record(&header)?;
    for (i, e) in events.iter().enumerate() {
        let lambda: Vec<String> = e.lambda.iter().map(|v| num(*v)).collect();
        let mut row = vec![
            i.to_string(),
            num(e.time),
            e.surface.to_string(),
            e.label.clone(),
            num(e.dwell),
            e.grazing.to_string(),
            opt(e.epsilon),
            lambda.join(";"),
        ];
        row.extend(e.pre.iter().map(|v| num(*v)));
        row.extend(e.post.iter().map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Normalized grid as a matrix: first column the y centre of the row, one
/// column per x centre.
pub fn write_grid(path: &Path, grid: &DensityGrid) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((0..grid.cols).map(|c| num(grid.centre(0, c).0)));
    w.write_record(&header)?;
    let density = grid.normalized();
    for r in 0..grid.rows {
        let mut row = vec![num(grid.centre(r, 0).1)];
        row.extend(density[r * grid.cols..(r + 1) * grid.cols].iter().map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
