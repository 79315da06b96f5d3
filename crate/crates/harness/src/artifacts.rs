//! On-disk artifacts of a run: CSV series, JSON-lines logs and JSON reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use amo_core::compose::ErrorCurve;
use amo_core::scheduler::GeometrySnapshot;
use amo_core::OperatorType;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::trace::TraceReport;
use crate::train::RunArtifacts;

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// `step,loss,lr`, one row per training step (1-based).
pub fn write_loss_csv(path: &Path, losses: &[f64], lrs: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "loss", "lr"])?;
    for (i, (loss, lr)) in losses.iter().zip(lrs).enumerate() {
        w.serialize((i + 1, loss, lr))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// One row per step count `k`, one column per operator type.
pub fn write_curves_csv(path: &Path, curves: &[(OperatorType, ErrorCurve)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(curves.iter().map(|(op, _)| op.name().to_string()));
    w.write_record(&header)?;
    if let Some((_, first)) = curves.first() {
        if curves.iter().any(|(_, c)| c.k_min != first.k_min || c.k_max() != first.k_max()) {
            return Err(HarnessError::Config("error curves cover different step ranges".into()));
        }
        for k in first.k_min..=first.k_max() {
            let mut row = vec![k.to_string()];
            row.extend(curves.iter().map(|(_, c)| c.at(k).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Long-format median-κ series: `series,key,step,median_kappa`.
pub fn write_trace_series_csv(path: &Path, report: &TraceReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series", "key", "step", "median_kappa"])?;
    for (op, series) in &report.type_series {
        for (step, k) in series {
            w.serialize(("type", op.name(), step, k))?;
        }
    }
    for (layer, series) in &report.layer_series {
        for (step, k) in series {
            w.serialize(("layer", layer.to_string(), step, k))?;
        }
    }
    for (group, series) in [("shallow", &report.shallow_series), ("deep", &report.deep_series)] {
        for (step, k) in series {
            w.serialize(("group", group, step, k))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_jsonl(path: &Path, snapshots: &[GeometrySnapshot]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(|e| HarnessError::io(path, e))?);
    for s in snapshots {
        writeln!(file, "{}", serde_json::to_string(s)?).map_err(|e| HarnessError::io(path, e))?;
    }
    file.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    optimizer: &'a str,
    steps: usize,
    initial_loss: f64,
    final_loss: f64,
    observation_steps: &'a [usize],
    locked_total: Option<usize>,
}

/// Writes every artifact of `run` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_loss_csv(&dir.join("loss.csv"), &run.losses, &run.lrs)?;

    let mut ns = csv_writer(&dir.join("ns_steps.csv"))?;
    ns.write_record(["step", "op_type", "ns_steps"])?;
    for r in &run.ns_steps {
        ns.serialize((r.step, r.op_type.name(), r.steps))?;
    }
    ns.flush().map_err(|e| HarnessError::io(dir, e))?;

    if !run.geometry.is_empty() {
        write_jsonl(&dir.join("geometry.jsonl"), &run.geometry)?;
    }
    if !run.trace.is_empty() {
        write_jsonl(&dir.join("trace.jsonl"), &run.trace)?;
    }
    if let Some(plan) = &run.plan {
        fs::write(dir.join("plan.json"), plan.to_json()? + "\n").map_err(|e| HarnessError::io(dir, e))?;
    }
    if !run.curves.is_empty() {
        let named: Vec<_> = OperatorType::ALL.into_iter().zip(run.curves.iter().cloned()).collect();
        write_curves_csv(&dir.join("curves.csv"), &named)?;
    }
    if !run.locked.is_empty() {
        write_json(&dir.join("locked_schedules.json"), &run.locked)?;
    }
    write_json(
        &dir.join("summary.json"),
        &Summary {
            optimizer: run.optimizer.name(),
            steps: run.losses.len(),
            initial_loss: run.initial_loss(),
            final_loss: run.final_loss(20),
            observation_steps: &run.observation_steps,
            locked_total: run.plan.as_ref().map(|p| p.per_type.iter().map(|e| e.steps).sum()),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use amo_core::compose::error_curve;

    fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
        (header, rows)
    }

    #[test]
    fn empty_loss_series_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(&path, &[], &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "step,loss,lr\n");
    }

    #[test]
    fn hundred_steps_give_hundred_and_one_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let losses: Vec<f64> = (0..100).map(|i| 4.0 / (1.0 + i as f64)).collect();
        write_loss_csv(&path, &losses, &vec![1e-3; 100]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 101);
        let (_, rows) = read_rows(&path);
        for (row, loss) in rows.iter().zip(&losses) {
            assert_eq!(row[1].parse::<f64>().unwrap(), *loss);
        }
    }

    #[test]
    fn curve_grid_is_seven_by_five() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let curves: Vec<_> = OperatorType::ALL
            .into_iter()
            .enumerate()
            .map(|(i, op)| (op, error_curve(1e-3 * (i + 1) as f64, 3, 7).unwrap()))
            .collect();
        write_curves_csv(&path, &curves).unwrap();
        let (header, rows) = read_rows(&path);
        assert_eq!(header.len(), 8);
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.len() == 8));
        assert_eq!(rows[0][3].parse::<f64>().unwrap(), curves[2].1.at(3));
    }
}
