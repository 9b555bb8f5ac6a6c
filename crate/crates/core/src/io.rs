//! File formats: CSV for panels and matrices (header row, IEEE-754
//! round-trippable decimals via Ryu, which `csv` uses for f64), JSON for
//! partitions, specs, fit reports, and delta estimates.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Partition, StandardizedPanel};
use crate::error::{Error, Result};

/// Writes a panel as CSV: header row of column ids, one row per observation.
pub fn write_panel_csv<W: Write>(panel: &StandardizedPanel, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(panel.column_ids())?;
    for row in panel.values().rows() {
        wtr.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_panel_csv_path(panel: &StandardizedPanel, path: &Path) -> Result<()> {
    write_panel_csv(panel, std::fs::File::create(path)?)
}

/// Reads a generic numeric CSV with a header row; returns (column ids, data).
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidCsv(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let d = headers.len();
    let mut data: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::InvalidCsv(e.to_string()))?;
        if record.len() != d {
            return Err(Error::InvalidCsv(format!(
                "row {} has {} fields, expected {d}",
                rows + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::InvalidCsv(format!("not a number: {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    let matrix = Array2::from_shape_vec((rows, d), data)
        .map_err(|e| Error::InvalidCsv(e.to_string()))?;
    Ok((headers, matrix))
}

pub fn read_matrix_csv_path(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    read_matrix_csv(std::fs::File::open(path)?)
}

/// Writes a square matrix row-major with generated column headers
/// (`c0..c{d-1}`) and an optional `# key=value` provenance comment line.
pub fn write_matrix_csv<W: Write>(
    matrix: &Array2<f64>,
    provenance: Option<&str>,
    mut writer: W,
) -> Result<()> {
    if let Some(line) = provenance {
        writeln!(writer, "# {line}")?;
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record((0..matrix.ncols()).map(|j| format!("c{j}")))?;
    for row in matrix.rows() {
        wtr.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix_csv_path(
    matrix: &Array2<f64>,
    provenance: Option<&str>,
    path: &Path,
) -> Result<()> {
    write_matrix_csv(matrix, provenance, std::fs::File::create(path)?)
}

/// Partition document: labels plus the seed that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl PartitionDocument {
    pub fn new(partition: &Partition, seed: Option<u64>) -> Self {
        Self {
            k: partition.k(),
            assignment: partition.assignment().to_vec(),
            seed,
            config_hash: None,
        }
    }

    pub fn to_partition(&self) -> Result<Partition> {
        Partition::new(self.assignment.clone(), self.k)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(file)?)
}

/// Shortest decimal that round-trips the exact f64.
fn format_f64(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // `{}` on f64 is the shortest round-trippable representation
    format!("{v}")
}
