use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Reads one float per line. Blank lines and lines starting with `#` are
/// skipped.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let x: f64 = t
            .parse()
            .with_context(|| format!("{}:{}: not a number: {t:?}", path.display(), i + 1))?;
        out.push(x);
    }
    Ok(out)
}

/// Reads one column of a CSV file with a header row. `column` is either a
/// header name or a zero-based index.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let idx = match headers.iter().position(|h| h.trim() == column) {
        Some(i) => i,
        None => match column.parse::<usize>() {
            Ok(i) if i < headers.len() => i,
            _ => bail!("{}: no column {column:?}", path.display()),
        },
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV record", path.display()))?;
        let field = rec
            .get(idx)
            .with_context(|| format!("{}: row {} has no column {idx}", path.display(), i + 2))?;
        out.push(field.trim().parse().with_context(|| {
            format!("{}: row {}: not a number: {field:?}", path.display(), i + 2)
        })?);
    }
    Ok(out)
}

/// Reads a numeric matrix, one CSV row per trial. Ragged rows are an error.
pub fn read_matrix(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV record", path.display()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}: non-numeric field", path.display(), i + 1))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(rows)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Pretty JSON to `path`, or to stdout when `path` is `None`.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_series(path: Option<&Path>, values: &[f64]) -> Result<()> {
    let mut w = sink(path)?;
    for x in values {
        writeln!(w, "{x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
