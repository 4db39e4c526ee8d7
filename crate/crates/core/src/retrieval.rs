//! Canberra-distance scoring and exhaustive ranked retrieval.

use std::collections::HashSet;

use thiserror::Error;

use crate::features::{FeatureLayout, FeatureVector};

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("layout mismatch: database is {db}, probe is {probe}")]
    LayoutMismatch { db: String, probe: String },
    #[error("database is empty")]
    EmptyDatabase,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {id:?} has dimension {got}, database expects {expected}")]
    RecordDimension {
        id: String,
        got: usize,
        expected: usize,
    },
}

/// Canberra distance `sum |x_i - y_i| / (|x_i| + |y_i|)`.
///
/// A coordinate where both values are zero contributes nothing.
pub fn canberra(x: &[f64], y: &[f64]) -> Result<f64, RetrievalError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(RetrievalError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let denom = a.abs() + b.abs();
            if denom == 0.0 {
                0.0
            } else {
                (a - b).abs() / denom
            }
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    /// Class label; records sharing a writer are mutually relevant.
    pub writer: String,
    /// Image path, or `"synthetic"`.
    pub source: String,
    pub vector: FeatureVector,
}

/// An immutable collection of feature records sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDb {
    layout: FeatureLayout,
    records: Vec<FeatureRecord>,
}

impl FeatureDb {
    /// Validates ids and dimensions; records are kept sorted by id.
    pub fn new(
        layout: FeatureLayout,
        mut records: Vec<FeatureRecord>,
    ) -> Result<Self, RetrievalError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(RetrievalError::DuplicateId(r.id.clone()));
            }
            if r.vector.len() != layout.dim() {
                return Err(RetrievalError::RecordDimension {
                    id: r.id.clone(),
                    got: r.vector.len(),
                    expected: layout.dim(),
                });
            }
            if r.vector.layout != layout {
                return Err(RetrievalError::LayoutMismatch {
                    db: layout.transform.to_string(),
                    probe: r.vector.layout.transform.to_string(),
                });
            }
        }
        Ok(FeatureDb { layout, records })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// The same database without record `id`.
    pub fn without(&self, id: &str) -> FeatureDb {
        FeatureDb {
            layout: self.layout,
            records: self
                .records
                .iter()
                .filter(|r| r.id != id)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub id: String,
    pub writer: String,
    pub distance: f64,
}

/// Results in ascending distance; ties ordered by ascending id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores every record against `probe` and returns the best `k`.
pub fn query(
    db: &FeatureDb,
    probe: &FeatureVector,
    k: usize,
) -> Result<RankedList, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if probe.layout != db.layout || probe.len() != db.layout.dim() {
        return Err(RetrievalError::LayoutMismatch {
            db: db.layout.transform.to_string(),
            probe: probe.layout.transform.to_string(),
        });
    }
    if db.is_empty() {
        return Err(RetrievalError::EmptyDatabase);
    }
    let mut scored = db
        .records
        .iter()
        .map(|r| Ok((canberra(&probe.values, &r.vector.values)?, r)))
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored.truncate(k);
    Ok(RankedList {
        entries: scored
            .into_iter()
            .map(|(distance, r)| RankedEntry {
                id: r.id.clone(),
                writer: r.writer.clone(),
                distance,
            })
            .collect(),
    })
}
