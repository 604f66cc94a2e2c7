//! CSV input and output.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Values are clamped into this interval before any density evaluation.
pub const CLAMP_LO: f64 = 1e-10;
pub const CLAMP_HI: f64 = 1.0 - 1e-10;

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, col)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: data row {}, column {col:?}: {cell:?} is not a number",
                        path.display(),
                        r + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        _ => CliError::Validation(format!("{}: {message}", path.display())),
    }
}

/// Reorders the columns of `table` to `variables` and clamps every value into
/// `[CLAMP_LO, CLAMP_HI]`. Values outside `[0, 1]` are rejected.
pub fn model_rows(table: &Table, variables: &[String], path: &Path) -> CliResult<Vec<Vec<f64>>> {
    if let Some(extra) = table.header.iter().find(|h| !variables.contains(h)) {
        return Err(CliError::Validation(format!(
            "{}: column {extra:?} is not a model variable",
            path.display()
        )));
    }
    let columns = variables
        .iter()
        .map(|v| {
            let found: Vec<usize> = (0..table.header.len()).filter(|&c| table.header[c] == *v).collect();
            match found[..] {
                [c] => Ok(c),
                [] => Err(CliError::Validation(format!(
                    "{}: no column for variable {v:?}",
                    path.display()
                ))),
                _ => Err(CliError::Validation(format!(
                    "{}: column {v:?} appears twice",
                    path.display()
                ))),
            }
        })
        .collect::<CliResult<Vec<usize>>>()?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            columns
                .iter()
                .map(|&c| {
                    let x = row[c];
                    if !(0.0..=1.0).contains(&x) {
                        return Err(CliError::Validation(format!(
                            "{}: data row {}, column {:?}: {x} is outside [0, 1]; run `transform` first",
                            path.display(),
                            r + 1,
                            table.header[c]
                        )));
                    }
                    Ok(x.clamp(CLAMP_LO, CLAMP_HI))
                })
                .collect()
        })
        .collect()
}

/// Average ranks of `values`, starting at 1.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Replaces every column by `rank / (N + 1)`.
pub fn pseudo_observations(table: &Table) -> CliResult<Table> {
    let n = table.rows.len();
    if n < 2 {
        return Err(CliError::Validation(format!(
            "transform needs at least 2 rows, got {n}"
        )));
    }
    let mut rows = vec![vec![0.0; table.header.len()]; n];
    for c in 0..table.header.len() {
        let col: Vec<f64> = table.rows.iter().map(|r| r[c]).collect();
        for (r, rank) in average_ranks(&col).into_iter().enumerate() {
            rows[r][c] = rank / (n + 1) as f64;
        }
    }
    Ok(Table {
        header: table.header.clone(),
        rows,
    })
}

/// Writes a header and rows with shortest round-trip formatting.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
