//! File formats: CSV ingestion with located errors, CSV/JSON result writers.
//!
//! CSV dialect: comma-separated, decimal point, one time-point per row, one
//! variable per column, optional single header row auto-detected by a
//! non-numeric first row. All emitted floats carry 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use treeseg_core::marginals::Dataset;
use treeseg_core::matrix::Mat;

use crate::simulate::GroundTruth;
use crate::{AppError, AppResult};

/// Loss-minimal float formatting: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Read one dataset from a CSV file.
pub fn read_csv(path: &Path) -> AppResult<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut names: Option<Vec<String>> = None;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if line_no == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            // header row
            names = Some(cells.iter().map(|c| c.to_string()).collect());
            width = Some(cells.len());
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(AppError::Ingestion(format!(
                    "{}: line {} has {} fields, expected {w}",
                    path.display(),
                    line_no + 1,
                    cells.len()
                )));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                AppError::Ingestion(format!(
                    "{}: line {}, column {}: cannot parse {cell:?} as a number",
                    path.display(),
                    line_no + 1,
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(AppError::Ingestion(format!(
                    "{}: line {}, column {}: non-finite value {cell:?}",
                    path.display(),
                    line_no + 1,
                    col + 1
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    let n = rows.len();
    let p = width.unwrap_or(0);
    if n < 2 || p < 2 {
        return Err(AppError::Ingestion(format!(
            "{}: need at least 2 rows and 2 columns, got {n}x{p}",
            path.display()
        )));
    }
    let mut values = Mat::zeros(n, p);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values.set(i, j, v);
        }
    }
    let mut data = Dataset::new(values)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    data.replicate_id = Some(path.display().to_string());
    data.variable_names = names;
    Ok(data)
}

/// Read several replicates (explicit files, or every `*.csv` in a directory)
/// and check they share one shape.
pub fn read_replicates(paths: &[PathBuf]) -> AppResult<Vec<Dataset>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
                .collect();
            inside.sort();
            files.extend(inside);
        } else {
            files.push(path.clone());
        }
    }
    if files.is_empty() {
        return Err(AppError::Ingestion("no input CSV files found".into()));
    }
    let datasets: Vec<Dataset> = files.iter().map(|f| read_csv(f)).collect::<AppResult<_>>()?;
    let (n, p) = (datasets[0].len(), datasets[0].dim());
    for d in &datasets[1..] {
        if d.len() != n || d.dim() != p {
            return Err(AppError::Ingestion(format!(
                "replicate shape mismatch: {} is {}x{}, expected {n}x{p}",
                d.replicate_id.as_deref().unwrap_or("?"),
                d.len(),
                d.dim()
            )));
        }
    }
    Ok(datasets)
}

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> AppResult<()> {
    let mut out = String::new();
    if let Some(names) = &data.variable_names {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for t in 0..data.len() {
        let row: Vec<String> = (0..data.dim()).map(|j| fmt_f64(data.values().get(t, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Generic CSV table writer: header plus stringified rows.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> AppResult<()> {
    let mut out = String::with_capacity(rows.len() * 32);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Serialize ground truth as JSON.
pub fn write_truth_json(path: &Path, truth: &GroundTruth) -> AppResult<()> {
    let doc = serde_json::json!({
        "change_points": truth.change_points,
        "adjacency_by_segment": truth.adjacency_by_segment.iter().map(mat_to_rows).collect::<Vec<_>>(),
        "precision_by_segment": truth.precision_by_segment.iter().map(mat_to_rows).collect::<Vec<_>>(),
    });
    write_atomic(path, serde_json::to_string_pretty(&doc)?.as_bytes())
}

pub fn read_truth_json(path: &Path) -> AppResult<GroundTruth> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", path.display())))?;
    let change_points = doc["change_points"]
        .as_array()
        .ok_or_else(|| AppError::Ingestion("truth file: missing change_points".into()))?
        .iter()
        .map(|v| v.as_u64().map(|x| x as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| AppError::Ingestion("truth file: bad change_points".into()))?;
    let parse_mats = |key: &str| -> AppResult<Vec<Mat>> {
        doc[key]
            .as_array()
            .ok_or_else(|| AppError::Ingestion(format!("truth file: missing {key}")))?
            .iter()
            .map(|m| {
                let rows = m
                    .as_array()
                    .ok_or_else(|| AppError::Ingestion(format!("truth file: bad {key}")))?;
                let r = rows.len();
                let c = rows
                    .first()
                    .and_then(|x| x.as_array())
                    .map(|x| x.len())
                    .ok_or_else(|| AppError::Ingestion(format!("truth file: bad {key}")))?;
                let mut out = Mat::zeros(r, c);
                for (i, row) in rows.iter().enumerate() {
                    let cells = row
                        .as_array()
                        .filter(|x| x.len() == c)
                        .ok_or_else(|| AppError::Ingestion(format!("truth file: ragged {key}")))?;
                    for (j, v) in cells.iter().enumerate() {
                        out.set(
                            i,
                            j,
                            v.as_f64().ok_or_else(|| {
                                AppError::Ingestion(format!("truth file: non-numeric {key}"))
                            })?,
                        );
                    }
                }
                Ok(out)
            })
            .collect()
    };
    Ok(GroundTruth {
        change_points,
        adjacency_by_segment: parse_mats("adjacency_by_segment")?,
        precision_by_segment: parse_mats("precision_by_segment")?,
    })
}

pub fn write_json(path: &Path, doc: &serde_json::Value) -> AppResult<()> {
    write_atomic(path, serde_json::to_string_pretty(doc)?.as_bytes())
}

pub fn write_string(path: &Path, text: &str) -> AppResult<()> {
    write_atomic(path, text.as_bytes())
}
