//! PF Score and annotation records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Problem, ProblemType};
use crate::orchestrator::Version;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    /// The student reached the step without being told.
    SelfFound,
    Revealed,
    Hinted,
    NotReached,
}

/// Human annotation of one tutoring conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationAnnotation {
    pub session_id: String,
    pub problem: String,
    /// Status of each rubric step, keyed by step index.
    pub step_status: BTreeMap<usize, StepStatus>,
    /// Number of student-generated representation and solution methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rsm_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    /// Engine version that produced the conversation, used to group scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<Version>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RubricMismatch {
    #[error("annotation is for `{annotated}` but the problem is `{problem}`")]
    WrongProblem { annotated: String, problem: String },
    #[error("problem `{0}` has no rubric")]
    NoRubric(String),
    #[error("annotated steps {annotated:?} do not match rubric steps 1..={k}")]
    Steps { annotated: Vec<usize>, k: usize },
    #[error("rsm_count is only defined for invention problems")]
    RsmOnNonInvention,
}

/// One point per step the student found unaided, rescaled to a maximum
/// of 4. Hinted and revealed steps earn nothing.
pub fn compute_pf_score(annotation: &ConversationAnnotation, problem: &Problem) -> Result<f64, RubricMismatch> {
    check(annotation, problem)?;
    let k = problem.rubric_len();
    let found = annotation.step_status.values().filter(|s| **s == StepStatus::SelfFound).count();
    Ok(found as f64 * 4.0 / k as f64)
}

fn check(annotation: &ConversationAnnotation, problem: &Problem) -> Result<(), RubricMismatch> {
    if annotation.problem != problem.name {
        return Err(RubricMismatch::WrongProblem {
            annotated: annotation.problem.clone(),
            problem: problem.name.clone(),
        });
    }
    let k = problem.rubric_len();
    if k == 0 {
        return Err(RubricMismatch::NoRubric(problem.name.clone()));
    }
    if !annotation.step_status.keys().copied().eq(1..=k) {
        return Err(RubricMismatch::Steps { annotated: annotation.step_status.keys().copied().collect(), k });
    }
    if annotation.rsm_count.is_some() && problem.kind != ProblemType::Invention {
        return Err(RubricMismatch::RsmOnNonInvention);
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("cannot read annotations: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation line {line}: {source}")]
    Format { line: usize, source: serde_json::Error },
}

/// Parses line-delimited annotation records; blank lines are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<ConversationAnnotation>, AnnotationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| AnnotationError::Format { line: i + 1, source }))
        .collect()
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<ConversationAnnotation>, AnnotationError> {
    parse_annotations(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Corpus;
    use StepStatus::*;

    fn ann(problem: &str, steps: &[StepStatus]) -> ConversationAnnotation {
        ConversationAnnotation {
            session_id: "s".into(),
            problem: problem.into(),
            step_status: steps.iter().enumerate().map(|(i, s)| (i + 1, *s)).collect(),
            rsm_count: None,
            annotator: None,
            version: None,
        }
    }

    #[test]
    fn scores() {
        let c = Corpus::shipped();
        let cons = c.get("consistency").unwrap();
        let country = c.get("country").unwrap();
        let s = compute_pf_score(&ann("consistency", &[SelfFound, SelfFound, Revealed, SelfFound]), cons);
        assert_eq!(s, Ok(3.0));
        let s = compute_pf_score(&ann("country", &[SelfFound, Hinted, SelfFound]), country).unwrap();
        assert!((s - 8.0 / 3.0).abs() < 1e-12);
        let s = compute_pf_score(&ann("country", &[Revealed; 3]), country);
        assert_eq!(s, Ok(0.0));
    }

    #[test]
    fn mismatches() {
        let c = Corpus::shipped();
        let country = c.get("country").unwrap();
        assert!(matches!(
            compute_pf_score(&ann("country", &[SelfFound; 4]), country),
            Err(RubricMismatch::Steps { k: 3, .. })
        ));
        assert!(matches!(
            compute_pf_score(&ann("consistency", &[SelfFound; 3]), country),
            Err(RubricMismatch::WrongProblem { .. })
        ));
        let mut a = ann("country", &[SelfFound; 3]);
        a.rsm_count = Some(2);
        assert_eq!(compute_pf_score(&a, country), Err(RubricMismatch::RsmOnNonInvention));
    }

    #[test]
    fn jsonl_records() {
        let text = r#"{"session_id":"a","problem":"country","step_status":{"1":"self_found","2":"hinted","3":"not_reached"},"version":"V1"}

{"session_id":"b","problem":"consistency","step_status":{"1":"revealed"},"rsm_count":2,"annotator":"r1"}"#;
        let anns = parse_annotations(text).unwrap();
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].step_status[&2], Hinted);
        assert_eq!(anns[0].version, Some(Version::V1StratL));
        assert_eq!(anns[1].rsm_count, Some(2));
        assert!(matches!(parse_annotations("{}"), Err(AnnotationError::Format { line: 1, .. })));
    }
}
