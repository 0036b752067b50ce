//! Binary dataset and checkpoint formats, and CSV exchange.

mod checkpoint;
mod dataset;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, Manifest, CHECKPOINT_FORMAT,
    CHECKPOINT_MAGIC,
};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub(crate) fn f32_le(bytes: &[u8]) -> f32 {
    f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
}

/// Bounds-checked cursor over an input buffer.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], kind: &'static str) -> Self {
        Reader { bytes, pos: 0, kind }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.kind, format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn magic(&mut self, magic: &[u8]) -> Result<()> {
        let got = self.take(magic.len()).map_err(|_| Error::format(self.kind, "missing magic bytes"))?;
        if got != magic {
            return Err(Error::format(self.kind, "bad magic bytes"));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

/// Default column names `x0, x1, ...`.
pub fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Writes a matrix as CSV with one row per column of `data`.
pub fn write_matrix_csv<W: Write>(writer: W, names: &[String], data: &DMatrix<f64>) -> Result<()> {
    if names.len() != data.nrows() {
        return Err(Error::arg(format!("{} column names for {} rows", names.len(), data.nrows())));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(names).map_err(csv_err)?;
    for col in data.column_iter() {
        w.write_record(col.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(writer: W, traj: &Trajectory, names: Option<&[String]>) -> Result<()> {
    let default = default_names("x", traj.dim());
    write_matrix_csv(writer, names.unwrap_or(&default), &traj.data)
}

fn csv_err(e: csv::Error) -> Error {
    Error::format("CSV", e.to_string())
}

/// Parses a CSV with a header row and one numeric row per time step.
///
/// Returns the header names and an `N x T` trajectory sampled at `dt`.
pub fn parse_trajectory_csv<R: Read>(reader: R, dt: f64) -> Result<(Vec<String>, Trajectory)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::format("CSV", "missing header row"));
    }
    let n = names.len();
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != n {
            return Err(Error::format("CSV", format!("row {} has {} fields, header has {n}", line + 2, record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format("CSV", format!("row {}: `{field}` is not a number", line + 2)))?;
            if !v.is_finite() {
                return Err(Error::format("CSV", format!("row {}: non-finite value", line + 2)));
            }
            values.push(v);
        }
    }
    let t = values.len() / n;
    let traj = Trajectory::new(DMatrix::from_column_slice(n, t, &values), dt)?;
    Ok((names, traj))
}

pub fn read_trajectory_csv(path: &std::path::Path, dt: f64) -> Result<(Vec<String>, Trajectory)> {
    parse_trajectory_csv(std::fs::File::open(path)?, dt)
}
