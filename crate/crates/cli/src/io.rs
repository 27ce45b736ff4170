//! Delimited-text input and output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use tailblend::data::{Column, Dataset};

use crate::error::{CliError, CliResult};

/// Name of the optional component-label column.
pub const LABEL_COLUMN: &str = "label";

/// Rows read and rows dropped while loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadDiagnostics {
    pub rows: usize,
    pub rejected: usize,
}

/// Reads `path` (or standard input for `-`) into a string.
pub fn read_input(path: &str) -> CliResult<String> {
    let mut s = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut s)?;
    } else {
        File::open(Path::new(path))
            .map_err(|e| CliError::Data(format!("cannot open {path}: {e}")))?
            .read_to_string(&mut s)?;
    }
    Ok(s)
}

/// Writes `text` to `path`, or to standard output when `path` is `None` or `-`.
pub fn write_output(path: Option<&str>, text: &str) -> CliResult<()> {
    match path {
        None | Some("-") => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {p}: {e}")))?,
    }
    Ok(())
}

/// Loads a header-first, comma-separated file.
pub fn load_dataset(path: &str, y_columns: [&str; 2], covariates: &[String]) -> CliResult<(Dataset, LoadDiagnostics)> {
    parse_dataset(&read_input(path)?, y_columns, covariates)
}

/// Parses comma-separated text with a header row. Rows with a missing or
/// non-numeric value in a selected column are dropped and counted. A
/// `label` column is kept when every retained row has an integer label.
pub fn parse_dataset(text: &str, y_columns: [&str; 2], covariates: &[String]) -> CliResult<(Dataset, LoadDiagnostics)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("column '{name}' not found")))
    };
    let y_idx = [index(y_columns[0])?, index(y_columns[1])?];
    let x_idx = covariates.iter().map(|c| index(c)).collect::<CliResult<Vec<_>>>()?;
    let label_idx = headers.iter().position(|h| h == LABEL_COLUMN);

    let mut data = Dataset {
        covariates: covariates
            .iter()
            .map(|c| Column {
                name: c.clone(),
                values: Vec::new(),
            })
            .collect(),
        ..Dataset::default()
    };
    let mut labels: Option<Vec<usize>> = label_idx.map(|_| Vec::new());
    let mut diag = LoadDiagnostics::default();
    for record in reader.records() {
        let record = record?;
        diag.rows += 1;
        let num = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
        };
        let ys = [num(y_idx[0]), num(y_idx[1])];
        let xs: Vec<Option<f64>> = x_idx.iter().map(|&i| num(i)).collect();
        if ys.iter().chain(&xs).any(Option::is_none) {
            diag.rejected += 1;
            continue;
        }
        data.y1.push(ys[0].unwrap());
        data.y2.push(ys[1].unwrap());
        for (col, x) in data.covariates.iter_mut().zip(xs) {
            col.values.push(x.unwrap());
        }
        if let (Some(li), Some(l)) = (label_idx, labels.as_mut()) {
            match record.get(li).and_then(|s| s.parse::<usize>().ok()) {
                Some(v) => l.push(v),
                None => labels = None,
            }
        }
    }
    if data.is_empty() {
        return Err(CliError::Data(format!(
            "no usable rows ({} read, {} rejected)",
            diag.rows, diag.rejected
        )));
    }
    data.labels = labels;
    Ok((data, diag))
}

/// Comma-separated text with columns `y1, y2`, covariates, then `label`.
/// Floats use the shortest representation that reads back exactly.
pub fn dataset_to_csv(data: &Dataset) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y1".to_string(), "y2".to_string()];
    header.extend(data.covariates.iter().map(|c| c.name.clone()));
    if data.labels.is_some() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row = vec![data.y1[i].to_string(), data.y2[i].to_string()];
        row.extend(data.covariates.iter().map(|c| c.values[i].to_string()));
        if let Some(l) = &data.labels {
            row.push(l[i].to_string());
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Data(e.to_string()))
}
