//! Report files.
//!
//! * `metrics.json`: counts, aAcc/mIoU/mAcc, grouped mIoU keyed by split then
//!   group, and per-class scores.
//! * `metrics.csv`: one header row and one value row; aAcc, mIoU, mAcc, then
//!   one `split/group` column per group in registry order.
//! * `per-class-iou.csv`: `index,name,iou,acc`, one row per category.
//!
//! Absent values are `null` in JSON and empty cells in CSV. Key and column
//! order follow the registry, so unchanged inputs give byte-identical files.

use std::path::Path;

use aquaseg_core::metrics::MetricsReport;
use serde_json::{json, Map, Value};

use crate::error::{BenchError, Result};

pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const PER_CLASS_CSV: &str = "per-class-iou.csv";

pub fn report_to_json(report: &MetricsReport) -> Value {
    let mut grouped = Map::new();
    for g in &report.grouped {
        let split = grouped
            .entry(g.split.clone())
            .or_insert_with(|| Value::Object(Map::new()));
        split
            .as_object_mut()
            .expect("split entries are objects")
            .insert(g.group.clone(), json!(g.miou));
    }
    let per_class: Vec<Value> = report
        .per_class
        .iter()
        .map(|c| json!({"index": c.index, "name": c.name, "iou": c.iou, "acc": c.acc}))
        .collect();
    json!({
        "sample_count": report.sample_count,
        "pixel_count": report.pixel_count,
        "aAcc": report.aacc,
        "mIoU": report.miou,
        "mAcc": report.macc,
        "grouped": grouped,
        "per_class": per_class,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn metrics_csv(report: &MetricsReport) -> Vec<u8> {
    let mut header: Vec<String> = ["aAcc", "mIoU", "mAcc"].map(String::from).into();
    let mut values = vec![
        report.aacc.to_string(),
        report.miou.to_string(),
        report.macc.to_string(),
    ];
    for g in &report.grouped {
        header.push(format!("{}/{}", g.split, g.group));
        values.push(cell(g.miou));
    }
    csv_bytes(vec![header, values])
}

pub fn per_class_csv(report: &MetricsReport) -> Vec<u8> {
    let mut rows = vec![["index", "name", "iou", "acc"].map(String::from).into()];
    rows.extend(report.per_class.iter().map(|c| {
        vec![c.index.to_string(), c.name.clone(), cell(c.iou), cell(c.acc)]
    }));
    csv_bytes(rows)
}

/// Writes the three report files into `output_dir`, creating it if needed.
pub fn emit_report(report: &MetricsReport, output_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(output_dir).map_err(BenchError::output(output_dir))?;
    let mut json = serde_json::to_vec_pretty(&report_to_json(report)).expect("report serializes");
    json.push(b'\n');
    let files = [
        (METRICS_JSON, json),
        (METRICS_CSV, metrics_csv(report)),
        (PER_CLASS_CSV, per_class_csv(report)),
    ];
    for (name, bytes) in files {
        let path = output_dir.join(name);
        std::fs::write(&path, bytes).map_err(BenchError::output(&path))?;
    }
    Ok(())
}
