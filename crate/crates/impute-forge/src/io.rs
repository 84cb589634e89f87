//! CSV tables, schema files and the missingness audit sidecar.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use impute_forge_core::dataset::AuditEntry;
use impute_forge_core::{Cell, ColumnKind, Dataset, DatasetError, Schema};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema {path}: {source}")]
    Schema { path: String, source: serde_json::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn create(path: &Path) -> Result<File, IoError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a schema file: a JSON array of `{name, kind, description, role}`.
pub fn load_schema(path: &Path) -> Result<Schema, IoError> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?)).map_err(|source| IoError::Schema {
        path: path.display().to_string(),
        source,
    })
}

/// Parses CSV with a header row matching `schema` exactly. Fields are
/// trimmed; a field equal to one of `sentinels` (or empty) is missing.
pub fn read_csv<R: Read>(reader: R, schema: Schema, sentinels: &[String], provenance: &str) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    schema.check_header(&header)?;
    let kinds: Vec<ColumnKind> = schema.columns().iter().map(|c| c.kind).collect();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(kinds.len());
        for (c, field) in rec.iter().enumerate() {
            if field.is_empty() || sentinels.iter().any(|s| s == field) {
                row.push(Cell::Missing);
                continue;
            }
            row.push(match kinds.get(c) {
                Some(ColumnKind::Numerical) => match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Number(v),
                    _ => {
                        return Err(DatasetError::UnparsableNumeric {
                            row: r,
                            column: schema.column(c).name.clone(),
                            value: field.to_string(),
                        }
                        .into())
                    }
                },
                _ => Cell::Category(field.to_string()),
            });
        }
        rows.push(row);
    }
    Ok(Dataset::new(schema, rows, provenance)?)
}

pub fn load_csv(path: &Path, schema: Schema, sentinels: &[String]) -> Result<Dataset, IoError> {
    read_csv(
        std::io::BufReader::new(open(path)?),
        schema,
        sentinels,
        &path.display().to_string(),
    )
}

/// Writes the header and rows; missing cells become `missing`.
pub fn write_csv<W: Write>(d: &Dataset, writer: W, missing: &str) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.schema().names())?;
    for row in d.rows() {
        w.write_record(row.iter().map(|c| c.render().unwrap_or_else(|| missing.to_string())))?;
    }
    w.flush().map_err(|source| IoError::File {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: &Path, missing: &str) -> Result<(), IoError> {
    write_csv(d, std::io::BufWriter::new(create(path)?), missing)
}

/// Audit of injected missingness: source row, column, removed value.
pub fn save_audit(entries: &[AuditEntry], path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["row_index", "column", "original_value"])?;
    for e in entries {
        w.write_record([e.row_index.to_string(), e.column.clone(), e.original_value.clone()])?;
    }
    w.flush().map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
