//! Source annotation formats.
//!
//! - DOTA: one object per line, `x1 y1 x2 y2 x3 y3 x4 y4 category difficult`,
//!   optionally preceded by `imagesource:` and `gsd:` lines. Polygons become
//!   their axis-aligned min/max envelope.
//! - CSV: header `class,x0,y0,x1,y1` with corner coordinates in pixels.

use std::path::Path;

use aerocamo_core::BBox;
use serde::Deserialize;

use crate::error::{self, AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationFormat {
    Dota,
    Csv,
}

impl AnnotationFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            AnnotationFormat::Dota => "txt",
            AnnotationFormat::Csv => "csv",
        }
    }
}

/// An annotation with its class still named.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedBox {
    pub class: String,
    pub bbox: BBox,
}

pub fn parse_dota(text: &str, path: &Path) -> Result<Vec<NamedBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("imagesource:") || line.starts_with("gsd:") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 9 {
            return Err(AppError::format(path, format!("line {}: expected 8 coordinates and a category", i + 1)));
        }
        let coords: Vec<f64> = fields[..8]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::format(path, format!("line {}: {e}", i + 1)))?;
        let xs = coords.iter().step_by(2);
        let ys = coords.iter().skip(1).step_by(2);
        let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        out.push(NamedBox { class: fields[8].to_string(), bbox: BBox::from_corners(x0, y0, x1, y1) });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CsvRow {
    class: String,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<NamedBox>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let r = row.map_err(|e| AppError::format(path, e))?;
            if !(r.x1 > r.x0 && r.y1 > r.y0) {
                return Err(AppError::format(path, format!("degenerate box for class {}", r.class)));
            }
            Ok(NamedBox { class: r.class, bbox: BBox::from_corners(r.x0, r.y0, r.x1, r.y1) })
        })
        .collect()
}

pub fn load_annotations(path: &Path, format: AnnotationFormat) -> Result<Vec<NamedBox>> {
    let text = error::read_string(path)?;
    match format {
        AnnotationFormat::Dota => parse_dota(&text, path),
        AnnotationFormat::Csv => parse_csv(&text, path),
    }
}
