//! Productive Failure problem corpus.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::Grounding;

/// The shipped corpus with the two test problems.
pub const PF_CORPUS: &str = include_str!("../resources/problems/pf_corpus.json");

const FIELDS: [&str; 8] = ["type", "grade", "time", "name", "reference", "exercise", "solution", "rubric"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemType {
    Invention,
    IllStructured,
    WellStructured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricStep {
    pub index: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: ProblemType,
    pub grade: String,
    pub time: String,
    pub name: String,
    pub reference: String,
    pub exercise: String,
    pub solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<Vec<RubricStep>>,
}

impl Problem {
    pub fn grounding(&self) -> Grounding {
        Grounding {
            problem_id: self.name.clone(),
            problem_statement: self.exercise.clone(),
            solution: self.solution.clone(),
        }
    }

    pub fn rubric_len(&self) -> usize {
        self.rubric.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Validation(ValidationError),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// Position of the record in the corpus.
    pub record: usize,
    pub name: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}", self.record)?;
        if let Some(name) = &self.name {
            write!(f, " ({name})")?;
        }
        write!(f, ", field `{}`: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Corpus {
    problems: Vec<Problem>,
}

impl Corpus {
    pub fn shipped() -> Self {
        Self::parse(PF_CORPUS).expect("shipped corpus is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates a corpus document: a JSON array of problem
    /// records. Unknown fields are rejected.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let value: Value = serde_json::from_str(text)?;
        let records = value.as_array().ok_or_else(|| {
            DatasetError::Validation(ValidationError {
                record: 0,
                name: None,
                field: "<root>".into(),
                message: "corpus must be an array of problems".into(),
            })
        })?;
        let mut problems = Vec::with_capacity(records.len());
        let mut names = HashSet::new();
        for (i, record) in records.iter().enumerate() {
            let problem = validate_record(i, record).map_err(DatasetError::Validation)?;
            if !names.insert(problem.name.clone()) {
                return Err(DatasetError::Validation(ValidationError {
                    record: i,
                    name: Some(problem.name),
                    field: "name".into(),
                    message: "duplicate problem name".into(),
                }));
            }
            problems.push(problem);
        }
        Ok(Corpus { problems })
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn get(&self, name: &str) -> Result<&Problem, DatasetError> {
        self.problems
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| DatasetError::UnknownProblem(name.to_string()))
    }
}

fn validate_record(index: usize, record: &Value) -> Result<Problem, ValidationError> {
    let name = record.get("name").and_then(Value::as_str).map(str::to_string);
    let fail = |field: &str, message: &str| ValidationError {
        record: index,
        name: name.clone(),
        field: field.to_string(),
        message: message.to_string(),
    };
    let object = record.as_object().ok_or_else(|| fail("<record>", "record must be an object"))?;
    if let Some(unknown) = object.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(fail(unknown, "unknown field"));
    }
    for field in ["type", "grade", "time", "name", "reference", "exercise", "solution"] {
        match object.get(field) {
            None => return Err(fail(field, "missing field")),
            Some(Value::String(_)) => {}
            Some(_) => return Err(fail(field, "must be a string")),
        }
    }
    for field in ["name", "exercise", "solution"] {
        if object[field].as_str().is_some_and(|s| s.trim().is_empty()) {
            return Err(fail(field, "must not be empty"));
        }
    }
    if !matches!(object["type"].as_str(), Some("invention" | "ill-structured" | "well-structured")) {
        return Err(fail("type", "must be invention, ill-structured or well-structured"));
    }
    // every other field is checked above, so a failure here is in the rubric
    let problem: Problem =
        serde_json::from_value(record.clone()).map_err(|e| fail("rubric", &e.to_string()))?;
    if let Some(rubric) = &problem.rubric {
        for (pos, step) in rubric.iter().enumerate() {
            if step.index != pos + 1 {
                return Err(fail("rubric", "step indices must be 1..k in order"));
            }
        }
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn shipped_corpus_contents() {
        let c = Corpus::shipped();
        let consistency = c.get("consistency").unwrap();
        assert_eq!(consistency.kind, ProblemType::Invention);
        assert_eq!(consistency.rubric_len(), 4);
        assert!(consistency.exercise.contains("Design as many different measures of consistency"));
        let country = c.get("country").unwrap();
        assert_eq!(country.kind, ProblemType::IllStructured);
        assert!(country.exercise.contains("250 seats"));
        assert!(country.solution.contains("Standard divisor"));
        assert_eq!(country.rubric_len(), 3);
        assert!(matches!(c.get("absent"), Err(DatasetError::UnknownProblem(n)) if n == "absent"));
    }

    #[test]
    fn round_trip_is_canonical() {
        let c = Corpus::shipped();
        let original: Value = serde_json::from_str(PF_CORPUS).unwrap();
        assert_eq!(serde_json::to_value(&c).unwrap(), original);
        assert_eq!(Corpus::parse(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }

    fn record() -> Value {
        json!({"type": "well-structured", "grade": "8", "time": "10 min", "name": "x",
               "reference": "r", "exercise": "e", "solution": "s"})
    }

    fn err_field(v: Value) -> String {
        match Corpus::parse(&json!([v]).to_string()) {
            Err(DatasetError::Validation(e)) => e.field,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        let mut v = record();
        v.as_object_mut().unwrap().remove("exercise");
        assert_eq!(err_field(v), "exercise");

        let mut v = record();
        v["difficulty"] = json!("hard");
        assert_eq!(err_field(v), "difficulty");

        let mut v = record();
        v["type"] = json!("open");
        assert_eq!(err_field(v), "type");

        let mut v = record();
        v["solution"] = json!("  ");
        assert_eq!(err_field(v), "solution");

        let mut v = record();
        v["rubric"] = json!([{"index": 2, "description": "d"}]);
        assert_eq!(err_field(v), "rubric");
    }

    #[test]
    fn duplicate_names_rejected() {
        let doc = json!([record(), record()]).to_string();
        assert!(matches!(
            Corpus::parse(&doc),
            Err(DatasetError::Validation(ValidationError { record: 1, .. }))
        ));
    }

    #[test]
    fn rubric_is_optional() {
        let c = Corpus::parse(&json!([record()]).to_string()).unwrap();
        assert_eq!(c.get("x").unwrap().rubric, None);
    }
}
