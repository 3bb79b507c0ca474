//! Tracer accuracy against hand-labelled dialog prefixes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, MetricsReport};
use crate::backend::{ChatBackend, SamplingParams};
use crate::dataset::{Corpus, DatasetError};
use crate::domain::{parse_feature_letters, DialogHistory, FeatureSet};
use crate::tracer::{trace, TracerError, TracerVariant};

/// A dialog prefix and the features of its last student utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub problem: String,
    /// `(tutor, student)` pairs; the first tutor utterance may be empty.
    pub turns: Vec<(String, String)>,
    /// Gold feature letters, e.g. `"af"`.
    pub features: String,
}

impl GoldRecord {
    pub fn gold(&self) -> FeatureSet {
        parse_feature_letters(&self.features)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TracerEvalError {
    #[error("cannot read gold file: {0}")]
    Io(#[from] std::io::Error),
    #[error("gold line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("gold record {record}: {source}")]
    Problem { record: usize, source: DatasetError },
    #[error("gold record {record}: {source}")]
    Tracer { record: usize, source: TracerError },
}

pub fn parse_gold(text: &str) -> Result<Vec<GoldRecord>, TracerEvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let record: GoldRecord =
                serde_json::from_str(l).map_err(|e| TracerEvalError::Format { line: i + 1, message: e.to_string() })?;
            if let Some(bad) = record.features.chars().find(|c| !c.is_ascii_alphabetic() || !('a'..='m').contains(&c.to_ascii_lowercase())) {
                return Err(TracerEvalError::Format { line: i + 1, message: format!("`{bad}` is not a feature letter") });
            }
            Ok(record)
        })
        .collect()
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>, TracerEvalError> {
    parse_gold(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracerEvaluation {
    pub predictions: Vec<FeatureSet>,
    pub degraded: usize,
    pub report: MetricsReport,
}

/// Traces every record independently, with no earlier tracer exchanges,
/// and scores the predictions.
pub async fn evaluate_tracer(
    backend: &dyn ChatBackend,
    corpus: &Corpus,
    records: &[GoldRecord],
    variant: TracerVariant,
    params: &SamplingParams,
) -> Result<TracerEvaluation, TracerEvalError> {
    let mut predictions = Vec::with_capacity(records.len());
    let mut degraded = 0;
    for (i, record) in records.iter().enumerate() {
        let problem = corpus
            .get(&record.problem)
            .map_err(|source| TracerEvalError::Problem { record: i + 1, source })?;
        let history = DialogHistory::from_pairs(record.turns.iter().cloned());
        let out = trace(backend, &problem.grounding(), &history, variant, params, &[])
            .await
            .map_err(|source| TracerEvalError::Tracer { record: i + 1, source })?;
        degraded += usize::from(out.assessment.degraded);
        predictions.push(out.assessment.features);
    }
    let gold: Vec<FeatureSet> = records.iter().map(GoldRecord::gold).collect();
    let report = classification_metrics(&gold, &predictions).expect("one prediction per record");
    Ok(TracerEvaluation { predictions, degraded, report })
}
