//! CSV input and output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use etpr::{Dataset, Matrix};

/// Numeric table with a header row.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader.headers().context("missing header row")?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        bail!("{}: missing header row", path.display());
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed row {}", path.display(), i + 1))?;
        if record.len() != header.len() {
            bail!("{}: row {} has {} fields, header has {}", path.display(), i + 1, record.len(), header.len());
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().with_context(|| format!("{}: row {}, column '{}': '{field}' is not a number", path.display(), i + 1, header[j]))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table { header, rows })
}

/// Covariate columns followed by one response column.
pub fn read_dataset(path: &Path) -> Result<(Dataset<f64>, Vec<String>)> {
    let t = read_table(path)?;
    let p = t.header.len();
    if p < 2 {
        bail!("{}: need at least one covariate column and a response column", path.display());
    }
    let n = t.rows.len();
    let x = Matrix::from_fn(n, p - 1, |i, j| t.rows[i][j]);
    let y = t.rows.iter().map(|r| r[p - 1]).collect();
    let data = Dataset::new(x, y)?;
    data.check_finite().with_context(|| format!("{}", path.display()))?;
    Ok((data, t.header))
}

/// Covariate-only table.
pub fn read_inputs(path: &Path, expected: usize) -> Result<Matrix<f64>> {
    let t = read_table(path)?;
    if t.header.len() != expected {
        bail!("{}: model expects {expected} covariate columns, found {}", path.display(), t.header.len());
    }
    if t.rows.iter().flatten().any(|v| !v.is_finite()) {
        bail!("{}: non-finite input value", path.display());
    }
    Ok(Matrix::from_fn(t.rows.len(), expected, |i, j| t.rows[i][j]))
}

/// Fixed 17-significant-digit rendering.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
