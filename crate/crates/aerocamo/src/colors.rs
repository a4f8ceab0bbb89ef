//! Printable color lists: one `R G B` triple per line, `#` starts a comment.
//! Values are read as 8-bit levels when any of them exceeds 1, otherwise as
//! intensities in `[0, 1]`.

use std::path::Path;

use aerocamo_core::PrintableColorSet;

use crate::error::{self, AppError, Result};

pub fn parse_colors(text: &str, path: &Path) -> Result<PrintableColorSet> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::format(path, format!("line {}: {e}", i + 1)))?;
        let [r, g, b] = vals[..] else {
            return Err(AppError::format(path, format!("line {}: expected three values", i + 1)));
        };
        rows.push([r, g, b]);
    }
    if rows.iter().flatten().any(|&v| v > 1.0) {
        rows.iter_mut().flatten().for_each(|v| *v /= 255.0);
    }
    PrintableColorSet::new(rows).map_err(|e| AppError::format(path, e))
}

pub fn load_colors(path: &Path) -> Result<PrintableColorSet> {
    parse_colors(&error::read_string(path)?, path)
}
