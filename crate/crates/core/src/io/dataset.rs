//! `DMX1` corpus files.
//!
//! Layout: the 8-byte magic `DMXCORP1`; six little-endian `u32` header fields
//! (version, N, T_seq, sequence count, T_C, overlap); every sequence as
//! row-major `f32` values; a UTF-8 JSON trailer with provenance and
//! generation parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{f32_le, Reader};
use crate::error::{Error, Result};
use crate::systems::{Corpus, CorpusParams};
use crate::trajectory::Trajectory;

pub const DATASET_MAGIC: &[u8; 8] = b"DMXCORP1";
pub const DATASET_VERSION: u32 = 1;
const KIND: &str = "DMX1 dataset";

/// Consecutive sequences sharing a source name and sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SequenceRun {
    name: Option<String>,
    dt: f64,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Trailer {
    provenance: Vec<String>,
    params: CorpusParams,
    sequences: Vec<SequenceRun>,
}

fn runs(corpus: &Corpus) -> Vec<SequenceRun> {
    let mut out: Vec<SequenceRun> = Vec::new();
    for s in &corpus.sequences {
        match out.last_mut() {
            Some(run) if run.name == s.name && run.dt.to_bits() == s.dt.to_bits() => run.count += 1,
            _ => out.push(SequenceRun { name: s.name.clone(), dt: s.dt, count: 1 }),
        }
    }
    out
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::format(KIND, format!("{what} {v} does not fit in u32")))
}

/// Serializes `corpus`; values are stored as `f32`.
pub fn encode_dataset(corpus: &Corpus) -> Result<Vec<u8>> {
    corpus.validate()?;
    let (n, t) = (corpus.dim(), corpus.seq_len());
    let mut out = Vec::with_capacity(32 + corpus.len() * n * t * 4);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [
        DATASET_VERSION,
        to_u32(n, "dimension")?,
        to_u32(t, "sequence length")?,
        to_u32(corpus.len(), "sequence count")?,
        to_u32(corpus.context_length, "context length")?,
        to_u32(corpus.overlap, "overlap")?,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for seq in &corpus.sequences {
        for row in seq.data.row_iter() {
            for v in row.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    let trailer = Trailer { provenance: corpus.provenance.clone(), params: corpus.params.clone(), sequences: runs(corpus) };
    out.extend_from_slice(serde_json::to_string(&trailer).expect("trailer serializes").as_bytes());
    Ok(out)
}

/// Parses a `DMX1` byte stream. The magic is checked before anything else.
pub fn decode_dataset(bytes: &[u8]) -> Result<Corpus> {
    let mut r = Reader::new(bytes, KIND);
    r.magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::format(KIND, format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    let t = r.u32()? as usize;
    let count = r.u32()? as usize;
    let context_length = r.u32()? as usize;
    let overlap = r.u32()? as usize;
    let per_seq = n.checked_mul(t).ok_or_else(|| Error::format(KIND, "sequence size overflows"))?;
    let payload = per_seq
        .checked_mul(count)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(KIND, "payload size overflows"))?;
    let body = r.take(payload)?;
    let trailer: Trailer = serde_json::from_slice(r.rest())
        .map_err(|e| Error::format(KIND, format!("bad JSON trailer: {e}")))?;
    let listed: usize = trailer.sequences.iter().map(|s| s.count).sum();
    if listed != count {
        return Err(Error::format(KIND, format!("trailer lists {listed} sequences, header has {count}")));
    }
    if count > 0 && (n == 0 || t == 0) {
        return Err(Error::format(KIND, "empty sequence shape"));
    }
    let mut sequences = Vec::with_capacity(count);
    let mut chunks = body.chunks_exact(4 * per_seq.max(1));
    for run in &trailer.sequences {
        for _ in 0..run.count {
            let chunk = chunks.next().ok_or_else(|| Error::format(KIND, "truncated payload"))?;
            let values: Vec<f64> = chunk.chunks_exact(4).map(|b| f32_le(b) as f64).collect();
            let data = DMatrix::from_row_slice(n, t, &values);
            let mut traj = Trajectory::new(data, run.dt).map_err(|e| Error::format(KIND, e.to_string()))?;
            traj.name = run.name.clone();
            sequences.push(traj);
        }
    }
    let corpus = Corpus { sequences, context_length, overlap, provenance: trailer.provenance, params: trailer.params };
    corpus.validate().map_err(|e| Error::format(KIND, e.to_string()))?;
    Ok(corpus)
}

pub fn write_dataset(path: &std::path::Path, corpus: &Corpus) -> Result<()> {
    std::fs::write(path, encode_dataset(corpus)?)?;
    Ok(())
}

pub fn read_dataset(path: &std::path::Path) -> Result<Corpus> {
    decode_dataset(&std::fs::read(path)?)
}
