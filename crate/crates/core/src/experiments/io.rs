//! Reading observation streams from disk.
//!
//! CSV files hold one point per row with an optional header row; `.jsonl`
//! and `.ndjson` files hold one JSON array of coordinates per line.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::Point;

fn parse_row<'a>(fields: impl Iterator<Item = &'a str>) -> Option<Vec<f64>> {
    fields.map(|f| f.trim().parse::<f64>().ok()).collect()
}

fn check(points: &[Point], line: usize) -> Result<()> {
    if let [first, .., last] = points {
        if first.dim() != last.dim() {
            return Err(Error::Usage(format!(
                "line {line}: expected {} coordinates, got {}",
                first.dim(),
                last.dim()
            )));
        }
    }
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        match parse_row(record.iter()) {
            Some(v) if !v.is_empty() => points.push(Point::new(v)?),
            _ if i == 0 => continue,
            _ => return Err(Error::Usage(format!("line {}: not a row of numbers", i + 1))),
        }
        check(&points, i + 1)?;
    }
    Ok(points)
}

pub fn read_points_jsonl(path: &Path) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = serde_json::from_str(&line)?;
        points.push(Point::new(v)?);
        check(&points, i + 1)?;
    }
    Ok(points)
}

/// Dispatches on the file extension.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "ndjson") => read_points_jsonl(path),
        _ => read_points_csv(path),
    }
}
