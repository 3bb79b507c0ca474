//! Student state tracing: a multi-label classification of the last
//! student utterance into state features, performed by an LLM.
//!
//! The prompt asks for a JSON object with a `justification` and a
//! `selection` string of feature letters, and ends with a lone `{` to prime
//! the model into that format. Replies are therefore parsed leniently: the
//! first well-formed object wins, and the reply is also tried with the
//! priming brace prepended.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::backend::{BackendError, CallMeta, ChatBackend, ChatRequest, Message, Role, SamplingParams};
use crate::domain::{render_transcript, DialogHistory, FeatureSet, Grounding, StateFeature};
use crate::template;

pub const TRACER_PROMPT_TEMPLATE: &str = include_str!("../resources/prompts/tracer_prompt.txt");
pub const TRACER_PROMPT_NO_JUSTIFICATION_TEMPLATE: &str =
    include_str!("../resources/prompts/tracer_prompt_no_justification.txt");

const REASK: &str = "Your previous answer could not be parsed. Answer again using only the json format requested above.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TracerVariant {
    Full,
    NoJustification,
    /// Only the last `pairs` turns (and as many prior exchanges) are shown.
    ShortMemory { pairs: usize },
}

impl TracerVariant {
    pub const SHORT_MEMORY: TracerVariant = TracerVariant::ShortMemory { pairs: 3 };

    fn memory(self) -> Option<usize> {
        match self {
            TracerVariant::ShortMemory { pairs } => Some(pairs.max(1)),
            _ => None,
        }
    }
}

impl std::str::FromStr for TracerVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(TracerVariant::Full),
            "no-justification" => Ok(TracerVariant::NoJustification),
            "short-memory" => Ok(TracerVariant::SHORT_MEMORY),
            _ => Err(format!("unknown tracer variant `{s}` (full, no-justification, short-memory)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub features: FeatureSet,
    pub justification: String,
    /// Set when the reply could not be parsed and the empty fallback was used.
    pub degraded: bool,
    pub raw: String,
}

/// One prior tracer call, replayed to the model as conversation history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracerExchange {
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no well-formed assessment object in tracer reply")]
pub struct ParseError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TracerError {
    #[error("history contains no student utterance to assess")]
    EmptyHistory,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn build_tracer_prompt(
    grounding: &Grounding,
    history: &DialogHistory,
    variant: TracerVariant,
) -> Result<String, TracerError> {
    if !history.has_student_utterance() {
        return Err(TracerError::EmptyHistory);
    }
    let template = match variant {
        TracerVariant::NoJustification => TRACER_PROMPT_NO_JUSTIFICATION_TEMPLATE,
        _ => TRACER_PROMPT_TEMPLATE,
    };
    let transcript = render_transcript(history, variant.memory());
    Ok(template::fill(
        template,
        &[
            ("pb", &grounding.problem_statement),
            ("sol", &grounding.solution),
            ("transcript", &transcript),
        ],
    ))
}

/// Finds the first JSON object in `raw` (or in `raw` with a leading `{`)
/// that satisfies `accept`.
pub(crate) fn find_object(raw: &str, accept: impl Fn(&Map<String, Value>) -> bool) -> Option<Map<String, Value>> {
    let primed = format!("{{{raw}");
    for candidate in [raw, primed.as_str()] {
        for (start, _) in candidate.match_indices('{') {
            let mut de = serde_json::Deserializer::from_str(&candidate[start..]);
            if let Ok(Value::Object(map)) = Value::deserialize(&mut de) {
                if accept(&map) {
                    return Some(map);
                }
            }
        }
    }
    None
}

fn selection_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .map(|parts| parts.concat()),
        _ => None,
    }
}

pub fn parse_assessment(raw: &str) -> Result<Assessment, ParseError> {
    let object = find_object(raw, |m| m.get("selection").and_then(selection_text).is_some())
        .ok_or(ParseError)?;
    let selection = selection_text(&object["selection"]).expect("accepted above");
    let mut features = FeatureSet::new();
    for c in selection.chars() {
        match StateFeature::from_code(c) {
            Some(f) => {
                features.insert(f);
            }
            None if c.is_alphabetic() => {
                tracing::warn!(letter = %c, "ignoring unknown state feature in tracer selection");
            }
            None => {}
        }
    }
    let justification = object
        .get("justification")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok(Assessment {
        features,
        justification,
        degraded: false,
        raw: raw.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutcome {
    pub assessment: Assessment,
    /// The exchange to append to the session's tracer history.
    pub exchange: TracerExchange,
    /// Metadata of the last backend call.
    pub meta: CallMeta,
    pub calls: u32,
}

/// Classifies the last student utterance. A reply that cannot be parsed
/// is re-asked once; if that also fails the assessment is empty and
/// marked degraded.
pub async fn trace(
    backend: &dyn ChatBackend,
    grounding: &Grounding,
    history: &DialogHistory,
    variant: TracerVariant,
    params: &SamplingParams,
    prior: &[TracerExchange],
) -> Result<TraceOutcome, TracerError> {
    let prompt = build_tracer_prompt(grounding, history, variant)?;
    let start = variant.memory().map_or(0, |n| prior.len().saturating_sub(n));
    let mut messages: Vec<Message> = prior[start..]
        .iter()
        .flat_map(|x| [Message::user(x.prompt.clone()), Message::assistant(x.response.clone())])
        .collect();
    messages.push(Message::user(prompt.clone()));

    let request = ChatRequest {
        role: Role::Tracer,
        messages,
        params: params.clone(),
    };
    let first = backend.complete(&request).await?;
    if let Ok(assessment) = parse_assessment(&first.content) {
        return Ok(TraceOutcome {
            exchange: TracerExchange { prompt, response: first.content },
            assessment,
            meta: first.meta,
            calls: 1,
        });
    }

    tracing::warn!("tracer reply was not a valid assessment; asking again");
    let mut retry = request;
    retry.messages.push(Message::assistant(first.content));
    retry.messages.push(Message::user(REASK));
    let second = backend.complete(&retry).await?;
    let assessment = parse_assessment(&second.content).unwrap_or_else(|_| {
        tracing::warn!("tracer reply unparseable twice; continuing with no features");
        Assessment {
            features: FeatureSet::new(),
            justification: String::new(),
            degraded: true,
            raw: second.content.clone(),
        }
    });
    Ok(TraceOutcome {
        exchange: TracerExchange { prompt, response: second.content },
        assessment,
        meta: second.meta,
        calls: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{RecordingBackend, ReplayBackend, RoleProfiles};
    use crate::domain::parse_feature_letters as fs;
    use proptest::prelude::*;

    fn grounding() -> Grounding {
        Grounding {
            problem_id: "p".into(),
            problem_statement: "PROBLEM TEXT".into(),
            solution: "SOLUTION TEXT".into(),
        }
    }

    fn history(n: usize) -> DialogHistory {
        DialogHistory::from_pairs((1..=n).map(|i| (format!("tutor {i}"), format!("student {i}"))))
    }

    #[test]
    fn direct_decode() {
        let a = parse_assessment(r#"{"justification":"algebra slip","selection":"bf"}"#).unwrap();
        assert_eq!(a.features, fs("bf"));
        assert_eq!(a.justification, "algebra slip");
        assert!(!a.degraded);
    }

    #[test]
    fn missing_priming_brace() {
        let a = parse_assessment(r#""justification":"ok","selection":"B, f!"}"#).unwrap();
        assert_eq!(a.features, fs("bf"));
        let a = parse_assessment("\n    \"justification\": \"x\",\n    \"selection\": \"k\"\n\n}").unwrap();
        assert_eq!(a.features, fs("k"));
    }

    #[test]
    fn prose_is_a_parse_error() {
        assert_eq!(parse_assessment("I think the student is confused."), Err(ParseError));
        assert_eq!(parse_assessment(""), Err(ParseError));
        assert_eq!(parse_assessment(r#"{"justification":"no selection"}"#), Err(ParseError));
    }

    #[test]
    fn lenient_selection_forms() {
        let a = parse_assessment(r#"Sure! {"selection": ["a", "C"], "justification": 3} trailing"#).unwrap();
        assert_eq!(a.features, fs("ac"));
        assert_eq!(a.justification, "");
        let a = parse_assessment(r#"{"justification":"j","selection":"a, z, q, aa"}"#).unwrap();
        assert_eq!(a.features, fs("a"));
    }

    #[test]
    fn full_prompt_layout() {
        let p = build_tracer_prompt(&grounding(), &history(1), TracerVariant::Full).unwrap();
        assert!(p.starts_with("A student and their tutor are working on a math problem:\n*Problem Statement*:\n##\nPROBLEM TEXT\n##"));
        assert!(p.ends_with("Tutor: tutor 1\nStudent: student 1\n\nAnalyze the last student's utterance.\n{"));
        assert_eq!(p.matches("PROBLEM TEXT").count(), 1);
        assert_eq!(p.matches("SOLUTION TEXT").count(), 1);
        assert!(p.contains("First briefly justify your selection"));
    }

    #[test]
    fn no_justification_prompt() {
        let p = build_tracer_prompt(&grounding(), &history(1), TracerVariant::NoJustification).unwrap();
        assert!(!p.contains("First briefly justify your selection"));
        assert!(!p.contains("\"justification\""));
        assert!(p.contains("\"selection\": \"..\""));
    }

    #[test]
    fn short_memory_shows_three_turns() {
        let p = build_tracer_prompt(&grounding(), &history(5), TracerVariant::SHORT_MEMORY).unwrap();
        assert_eq!(p.matches("Student: ").count(), 3);
        assert!(p.contains("Tutor: tutor 3\n"));
        assert!(!p.contains("student 2"));
    }

    #[test]
    fn empty_history_is_rejected() {
        assert_eq!(
            build_tracer_prompt(&grounding(), &DialogHistory::new(), TracerVariant::Full),
            Err(TracerError::EmptyHistory)
        );
        let only_opening = DialogHistory::from_pairs([("Hello!", "")]);
        assert_eq!(
            build_tracer_prompt(&grounding(), &only_opening, TracerVariant::Full),
            Err(TracerError::EmptyHistory)
        );
    }

    async fn run(responses: &[&str], prior: &[TracerExchange]) -> (TraceOutcome, RecordingBackend<ReplayBackend>) {
        let backend = RecordingBackend::new(ReplayBackend::from_responses(responses.iter().copied()));
        let params = RoleProfiles::default().tracer;
        let out = trace(&backend, &grounding(), &history(2), TracerVariant::Full, &params, prior)
            .await
            .unwrap();
        (out, backend)
    }

    #[tokio::test]
    async fn valid_reply_is_used() {
        let (out, backend) = run(&[r#""justification":"j","selection":"d"}"#], &[]).await;
        assert_eq!(out.assessment.features, fs("d"));
        assert!(!out.assessment.degraded);
        assert_eq!(out.calls, 1);
        let call = &backend.calls()[0].request;
        assert_eq!((call.params.temperature, call.params.top_p), (0.0, 0.1));
        assert_eq!(call.messages.len(), 1);
    }

    #[tokio::test]
    async fn garbage_then_valid() {
        let (out, backend) = run(&["hmm", r#"{"justification":"j","selection":"f"}"#], &[]).await;
        assert_eq!(out.assessment.features, fs("f"));
        assert!(!out.assessment.degraded);
        assert_eq!(out.calls, 2);
        let retry = &backend.calls()[1].request.messages;
        assert_eq!(retry.len(), 3);
        assert_eq!(retry[1], Message::assistant("hmm"));
        assert_eq!(retry[2].content, REASK);
    }

    #[tokio::test]
    async fn double_garbage_degrades() {
        let (out, _) = run(&["hmm", "still no"], &[]).await;
        assert!(out.assessment.features.is_empty());
        assert!(out.assessment.degraded);
        assert_eq!(out.exchange.response, "still no");
    }

    #[tokio::test]
    async fn prior_exchanges_become_history() {
        let prior = vec![
            TracerExchange { prompt: "p1".into(), response: "r1".into() },
            TracerExchange { prompt: "p2".into(), response: "r2".into() },
        ];
        let (_, backend) = run(&[r#"{"selection":""}"#], &prior).await;
        let msgs = &backend.calls()[0].request.messages;
        assert_eq!(msgs.len(), 5);
        assert_eq!(msgs[0], Message::user("p1"));
        assert_eq!(msgs[3], Message::assistant("r2"));
    }

    #[tokio::test]
    async fn replay_is_deterministic() {
        let reply = r#"{"justification":"j","selection":"ab"}"#;
        let (a, _) = run(&[reply], &[]).await;
        let (b, _) = run(&[reply], &[]).await;
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn parse_never_yields_foreign_features(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let raw = String::from_utf8_lossy(&bytes);
            if let Ok(a) = parse_assessment(&raw) {
                prop_assert!(a.features.iter().all(|f| StateFeature::ALL.contains(f)));
            }
        }
    }
}
