//! Evaluation reports: the full report as JSON plus a flat CSV of the
//! precision/recall points.

use std::path::Path;

use aerocamo_core::EvalReport;

use crate::error::{self, AppError, Result};

pub fn pr_points_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "threshold", "precision", "recall"]).expect("in-memory write");
    for p in &report.pr_points {
        w.write_record([
            report.condition.as_str().to_string(),
            p.threshold.to_string(),
            p.precision.to_string(),
            p.recall.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Writes `<stem>.json` and `<stem>_pr.csv` into `dir`.
pub fn save_report(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    error::write_json(&dir.join(format!("{stem}.json")), report)?;
    error::write(&dir.join(format!("{stem}_pr.csv")), pr_points_csv(report))
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let report: EvalReport = error::read_json(path)?;
    if !(0.0..=1.0).contains(&report.ap) {
        return Err(AppError::format(path, "AP outside [0, 1]"));
    }
    Ok(report)
}
