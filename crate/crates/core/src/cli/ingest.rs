//! CSV ingestion.
//!
//! Comma-separated, UTF-8, header row required, `.` as decimal separator.
//! Empty cells and `NA`/`NaN`/`.` count as missing; anything else that fails
//! to parse as a number is an error naming the line and column.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sample::{build_sample, MissingPolicy, RawRecord, SurvivalSample};

/// Column mapping for one input file.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub time: String,
    pub status: String,
    /// Covariate columns; `None` means every column except time and status.
    pub covariates: Option<Vec<String>>,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | "nan" | ".")
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if is_missing_token(s) {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        column: column.to_string(),
        message: format!("`{s}` is not a number"),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

pub fn read_sample_from_path(
    path: &Path,
    columns: &ColumnSpec,
    policy: MissingPolicy,
) -> Result<SurvivalSample> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot open {}: {e}", path.display()),
        ))
    })?;
    read_sample(file, columns, policy)
}

pub fn read_sample<R: Read>(
    reader: R,
    columns: &ColumnSpec,
    policy: MissingPolicy,
) -> Result<SurvivalSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!(
                "column `{name}` not found; available columns: {}",
                header.join(", ")
            ))
        })
    };
    let time_idx = find(&columns.time)?;
    let status_idx = find(&columns.status)?;
    let cov_names: Vec<String> = match &columns.covariates {
        Some(list) => list.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_idx && *i != status_idx)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    if cov_names.is_empty() {
        return Err(Error::Data("no covariate columns selected".into()));
    }
    let cov_idx = cov_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| parse_cell(row.get(i).unwrap_or(""), line, &header[i]);
        let covariates = cov_idx
            .iter()
            .map(|&i| cell(i))
            .collect::<Result<Vec<_>>>()?;
        let record = RawRecord {
            time: cell(time_idx)?,
            status: cell(status_idx)?,
            covariates,
            line,
        };
        if policy == MissingPolicy::FailOnIncomplete {
            if let Some(col) = first_missing(&record, &header, time_idx, status_idx, &cov_idx) {
                return Err(Error::Parse {
                    line,
                    column: col,
                    message: "missing value (use --missing drop to skip incomplete rows)".into(),
                });
            }
        }
        records.push(record);
    }
    build_sample(&records, cov_names, policy)
}

fn first_missing(
    r: &RawRecord,
    header: &[String],
    time_idx: usize,
    status_idx: usize,
    cov_idx: &[usize],
) -> Option<String> {
    if r.time.is_none() {
        return Some(header[time_idx].clone());
    }
    if r.status.is_none() {
        return Some(header[status_idx].clone());
    }
    r.covariates
        .iter()
        .zip(cov_idx)
        .find(|(v, _)| v.is_none())
        .map(|(_, &i)| header[i].clone())
}
