//! `.sigdb` persistence.
//!
//! A database file is line oriented: a JSON header object on the first line
//! followed by one JSON object per record, sorted by id.
//!
//! ```text
//! {"version":1,"transform":"dwt","params":{"levels":3,"wavelet":"db4"},"dim":20,"count":2}
//! {"id":"w01/01","writer":"w01","source":"corpus/w01/01.pgm","vector":[0.1,...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload is
//! bit-identical and repeated saves are byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvelet::CurveletConfig;
use crate::dwt::Wavelet;
use crate::features::{FeatureLayout, FeatureVector, TransformSpec};
use crate::retrieval::{FeatureDb, FeatureRecord, RetrievalError};

pub const FORMAT_VERSION: u32 = 1;

/// Conventional file extension.
pub const EXTENSION: &str = "sigdb";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("line {line}: {message}")]
    DimensionMismatch { line: usize, message: String },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("record {id:?} holds a non-finite value")]
    NonFinite { id: String },
    #[error(transparent)]
    Invalid(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DwtParams {
    levels: usize,
    wavelet: Wavelet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Params {
    Dwt(DwtParams),
    Curvelet(CurveletConfig),
}

/// First line of a `.sigdb` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbHeader {
    version: u32,
    transform: String,
    params: serde_json::Value,
    pub dim: usize,
    pub count: usize,
}

impl DbHeader {
    pub fn for_db(db: &FeatureDb) -> Self {
        let layout = db.layout();
        let params = match layout.transform {
            TransformSpec::Dwt { levels, wavelet } => Params::Dwt(DwtParams { levels, wavelet }),
            TransformSpec::Curvelet(cfg) => Params::Curvelet(cfg),
        };
        DbHeader {
            version: FORMAT_VERSION,
            transform: layout.transform.name().to_string(),
            params: serde_json::to_value(params).expect("params serialize"),
            dim: layout.dim(),
            count: db.len(),
        }
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn transform(&self) -> Result<TransformSpec, StoreError> {
        let bad = |message: String| StoreError::ParseError { line: 1, message };
        match self.transform.as_str() {
            "dwt" => {
                let p: DwtParams =
                    serde_json::from_value(self.params.clone()).map_err(|e| bad(e.to_string()))?;
                Ok(TransformSpec::Dwt {
                    levels: p.levels,
                    wavelet: p.wavelet,
                })
            }
            "curvelet" => {
                let cfg: CurveletConfig =
                    serde_json::from_value(self.params.clone()).map_err(|e| bad(e.to_string()))?;
                cfg.validate().map_err(|e| bad(e.to_string()))?;
                Ok(TransformSpec::Curvelet(cfg))
            }
            other => Err(bad(format!("unknown transform {other:?}"))),
        }
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    writer: &'a str,
    source: &'a str,
    vector: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    id: String,
    writer: String,
    source: String,
    vector: Vec<f64>,
}

/// Serializes a database to its exact file bytes.
pub fn encode_db(db: &FeatureDb) -> Result<Vec<u8>, StoreError> {
    let mut out = serde_json::to_vec(&DbHeader::for_db(db)).expect("header serializes");
    out.push(b'\n');
    let mut records: Vec<&FeatureRecord> = db.records().iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    for r in records {
        if r.vector.values.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { id: r.id.clone() });
        }
        let line = RecordOut {
            id: &r.id,
            writer: &r.writer,
            source: &r.source,
            vector: &r.vector.values,
        };
        serde_json::to_writer(&mut out, &line).expect("record serializes");
        out.push(b'\n');
    }
    Ok(out)
}

pub fn save_db(db: &FeatureDb, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let bytes = encode_db(db)?;
    let mut file = BufWriter::new(fs::File::create(path)?);
    file.write_all(&bytes)?;
    file.flush()?;
    Ok(())
}

pub fn load_db(path: impl AsRef<Path>) -> Result<FeatureDb, StoreError> {
    decode_db(BufReader::new(fs::File::open(path)?))
}

pub fn decode_db(reader: impl BufRead) -> Result<FeatureDb, StoreError> {
    let mut lines = reader.lines();
    let header_line = lines.next().transpose()?.ok_or(StoreError::ParseError {
        line: 1,
        message: "missing header".into(),
    })?;
    // the version is checked before the rest of the header so files from
    // other format revisions are reported as such
    let raw: serde_json::Value =
        serde_json::from_str(&header_line).map_err(|e| StoreError::ParseError {
            line: 1,
            message: e.to_string(),
        })?;
    match raw.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(StoreError::VersionMismatch {
                found: v.min(u32::MAX as u64) as u32,
            })
        }
        None => {
            return Err(StoreError::ParseError {
                line: 1,
                message: "header has no version".into(),
            })
        }
    }
    let header: DbHeader = serde_json::from_value(raw).map_err(|e| StoreError::ParseError {
        line: 1,
        message: e.to_string(),
    })?;
    let transform = header.transform()?;
    let layout: FeatureLayout = transform.layout();
    if header.dim != layout.dim() {
        return Err(StoreError::DimensionMismatch {
            line: 1,
            message: format!(
                "header dim {} but {transform} yields {}",
                header.dim,
                layout.dim()
            ),
        });
    }

    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(&line).map_err(|e| StoreError::ParseError {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.vector.len() != header.dim {
            return Err(StoreError::DimensionMismatch {
                line: line_no,
                message: format!(
                    "record {:?} has {} values, header says {}",
                    rec.id,
                    rec.vector.len(),
                    header.dim
                ),
            });
        }
        records.push(FeatureRecord {
            id: rec.id,
            writer: rec.writer,
            source: rec.source,
            vector: FeatureVector::new(rec.vector, layout),
        });
    }
    if records.len() != header.count {
        return Err(StoreError::DimensionMismatch {
            line: 1,
            message: format!(
                "header count {} but file holds {} records",
                header.count,
                records.len()
            ),
        });
    }
    Ok(FeatureDb::new(layout, records)?)
}
