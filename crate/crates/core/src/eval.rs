//! Precision/recall at top-k cuts over one random query per writer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::retrieval::{query, FeatureDb, FeatureRecord, RankedList, RetrievalError};

/// Top-k cuts reported by default.
pub const DEFAULT_CUTS: [usize; 6] = [1, 2, 5, 8, 10, 12];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ranking is empty")]
    EmptyRanking,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("total relevant count must be at least 1")]
    NoRelevant,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid cuts: {0}")]
    InvalidCuts(String),
    #[error("reports use different cuts: {a:?} vs {b:?}")]
    CutMismatch { a: Vec<usize>, b: Vec<usize> },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn relevant_in_top(ranked: &RankedList, writer: &str, k: usize) -> usize {
    ranked
        .entries
        .iter()
        .take(k)
        .filter(|e| e.writer == writer)
        .count()
}

/// Fraction of the first `min(k, len)` results written by `relevant_writer`.
pub fn precision_at_k(
    ranked: &RankedList,
    relevant_writer: &str,
    k: usize,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if ranked.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    let retrieved = k.min(ranked.len());
    Ok(relevant_in_top(ranked, relevant_writer, k) as f64 / retrieved as f64)
}

/// Fraction of all `total_relevant` items found in the first `k` results.
pub fn recall_at_k(
    ranked: &RankedList,
    relevant_writer: &str,
    total_relevant: usize,
    k: usize,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if total_relevant == 0 {
        return Err(EvalError::NoRelevant);
    }
    if ranked.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    Ok(relevant_in_top(ranked, relevant_writer, k) as f64 / total_relevant as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Protocol {
    pub cuts: Vec<usize>,
    pub seed: u64,
    /// Keep the query in the database it is ranked against.
    pub query_in_db: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            cuts: DEFAULT_CUTS.to_vec(),
            seed: 0,
            query_in_db: true,
        }
    }
}

/// Raw counts for one query at one cut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRow {
    pub query_id: String,
    pub writer: String,
    pub k: usize,
    pub retrieved: usize,
    pub relevant_retrieved: usize,
    pub total_relevant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutSummary {
    pub k: usize,
    /// Mean precision over queries, in percent.
    pub precision: f64,
    /// Mean recall over queries, in percent.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub transform: String,
    pub protocol: Protocol,
    pub cuts: Vec<CutSummary>,
    pub rows: Vec<QueryRow>,
}

impl EvalReport {
    pub fn cut_values(&self) -> Vec<usize> {
        self.cuts.iter().map(|c| c.k).collect()
    }

    pub fn at(&self, k: usize) -> Option<&CutSummary> {
        self.cuts.iter().find(|c| c.k == k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// 64-bit FNV-1a; a stable hash so per-writer draws depend only on the
/// writer label and the seed.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// The query drawn for `writer` among its records (sorted by id).
pub fn draw_query<'a>(records: &[&'a FeatureRecord], writer: &str, seed: u64) -> &'a FeatureRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ label_hash(writer));
    records[rng.random_range(0..records.len())]
}

pub fn run_benchmark(db: &FeatureDb, protocol: &Protocol) -> Result<EvalReport, EvalError> {
    let mut cuts = protocol.cuts.clone();
    cuts.sort_unstable();
    cuts.dedup();
    if cuts.is_empty() || cuts[0] == 0 {
        return Err(EvalError::InvalidCuts(format!("{:?}", protocol.cuts)));
    }
    let max_k = *cuts.last().expect("nonempty");

    let mut by_writer: BTreeMap<&str, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in db.records() {
        by_writer.entry(r.writer.as_str()).or_default().push(r);
    }
    if by_writer.len() < 2 {
        return Err(EvalError::InsufficientData(format!(
            "{} writer(s), need at least 2",
            by_writer.len()
        )));
    }
    if !protocol.query_in_db {
        if let Some((w, _)) = by_writer.iter().find(|(_, recs)| recs.len() < 2) {
            return Err(EvalError::InsufficientData(format!(
                "writer {w:?} has a single sample; leave-out evaluation needs 2"
            )));
        }
    }

    let mut rows = Vec::with_capacity(by_writer.len() * cuts.len());
    let mut precision_sum = vec![0.0; cuts.len()];
    let mut recall_sum = vec![0.0; cuts.len()];
    for (writer, records) in &by_writer {
        let probe = draw_query(records, writer, protocol.seed);
        let (ranked, total_relevant) = if protocol.query_in_db {
            (query(db, &probe.vector, max_k)?, records.len())
        } else {
            (
                query(&db.without(&probe.id), &probe.vector, max_k)?,
                records.len() - 1,
            )
        };
        for (i, &k) in cuts.iter().enumerate() {
            precision_sum[i] += precision_at_k(&ranked, writer, k)?;
            recall_sum[i] += recall_at_k(&ranked, writer, total_relevant, k)?;
            rows.push(QueryRow {
                query_id: probe.id.clone(),
                writer: writer.to_string(),
                k,
                retrieved: k.min(ranked.len()),
                relevant_retrieved: relevant_in_top(&ranked, writer, k),
                total_relevant,
            });
        }
    }

    let queries = by_writer.len() as f64;
    let summaries = cuts
        .iter()
        .zip(precision_sum.iter().zip(&recall_sum))
        .map(|(&k, (p, r))| CutSummary {
            k,
            precision: 100.0 * p / queries,
            recall: 100.0 * r / queries,
        })
        .collect();
    Ok(EvalReport {
        transform: db.layout().transform.to_string(),
        protocol: Protocol {
            cuts: cuts.clone(),
            ..protocol.clone()
        },
        cuts: summaries,
        rows,
    })
}

/// Side-by-side CSV of two reports, percentages to one decimal place.
pub fn comparison_csv(a: &EvalReport, b: &EvalReport) -> Result<String, EvalError> {
    if a.cut_values() != b.cut_values() {
        return Err(EvalError::CutMismatch {
            a: a.cut_values(),
            b: b.cut_values(),
        });
    }
    let mut out = String::from("k,precision_A,recall_A,precision_B,recall_B\n");
    for (ca, cb) in a.cuts.iter().zip(&b.cuts) {
        writeln!(
            out,
            "{},{:.1},{:.1},{:.1},{:.1}",
            ca.k, ca.precision, ca.recall, cb.precision, cb.recall
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn emit_comparison(
    a: &EvalReport,
    b: &EvalReport,
    path: impl AsRef<Path>,
) -> Result<(), EvalError> {
    let csv = comparison_csv(a, b)?;
    fs::write(path, csv)?;
    Ok(())
}

/// Plain-text table of one report: one row per cut.
pub fn format_table(report: &EvalReport) -> String {
    let mut out = format!(
        "{}\n{:>6}  {:>11}  {:>8}\n",
        report.transform, "top", "precision%", "recall%"
    );
    for c in &report.cuts {
        writeln!(out, "{:>6}  {:>11.1}  {:>8.1}", c.k, c.precision, c.recall)
            .expect("string write");
    }
    out
}

/// Table with two reports side by side.
pub fn format_comparison_table(a: &EvalReport, b: &EvalReport) -> Result<String, EvalError> {
    if a.cut_values() != b.cut_values() {
        return Err(EvalError::CutMismatch {
            a: a.cut_values(),
            b: b.cut_values(),
        });
    }
    let mut out = format!("A: {}\nB: {}\n", a.transform, b.transform);
    writeln!(
        out,
        "{:>6}  {:>12}  {:>9}  {:>12}  {:>9}",
        "top", "precision_A", "recall_A", "precision_B", "recall_B"
    )
    .expect("string write");
    for (ca, cb) in a.cuts.iter().zip(&b.cuts) {
        writeln!(
            out,
            "{:>6}  {:>12.1}  {:>9.1}  {:>12.1}  {:>9.1}",
            ca.k, ca.precision, ca.recall, cb.precision, cb.recall
        )
        .expect("string write");
    }
    Ok(out)
}
