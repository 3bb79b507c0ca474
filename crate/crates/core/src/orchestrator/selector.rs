//! LLM-driven intent selection, the V4 baseline: the strategy is described
//! to a model in natural language instead of being encoded as a graph.

use serde_json::Value;

use crate::backend::{BackendError, CallMeta, ChatBackend, ChatRequest, Message, Role, SamplingParams};
use crate::domain::{feature_letters, FeatureSet, Intent, IntentSet};
use crate::template;
use crate::tracer::find_object;

pub const INTENT_SELECTOR_TEMPLATE: &str =
    include_str!("../../resources/prompts/intent_selector_prompt.txt");

const REASK: &str = "Your previous answer could not be parsed. Answer again using only the json format requested above.";

/// Taxonomy codes the selector prompt offers, and the intents they map to.
pub const SELECTOR_CODES: [(&str, Intent); 11] = [
    ("P_LIMITS", Intent::IdentifyLimits),
    ("P_HYPOTHESIS", Intent::PromptIntuition),
    ("P_ARTICULATION", Intent::ElicitArticulation),
    ("P_REFLECTION", Intent::SelfReflect),
    ("S_SELFCORRECTION", Intent::GuideSelfCorrection),
    ("S_CORRECTION", Intent::Correct),
    ("S_STRATEGY", Intent::SeekStrategy),
    ("S_State", Intent::State),
    ("S_OFFLOAD", Intent::Offload),
    ("S_HINT", Intent::Hint),
    ("G_GREETINGS", Intent::Greetings),
];

pub fn intent_for_code(code: &str) -> Option<Intent> {
    SELECTOR_CODES
        .iter()
        .find(|(c, _)| c.eq_ignore_ascii_case(code.trim()))
        .map(|(_, i)| *i)
}

pub fn code_for_intent(intent: Intent) -> Option<&'static str> {
    SELECTOR_CODES.iter().find(|(_, i)| *i == intent).map(|(c, _)| *c)
}

pub fn build_selector_prompt(prev: &IntentSet, features: &FeatureSet) -> String {
    let previous = if prev.is_empty() {
        "none".to_string()
    } else {
        prev.iter()
            .map(|i| code_for_intent(*i).unwrap_or(i.display_name()))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let codes = if features.is_empty() {
        "none".to_string()
    } else {
        feature_letters(features)
            .chars()
            .map(String::from)
            .collect::<Vec<_>>()
            .join(", ")
    };
    template::fill(
        INTENT_SELECTOR_TEMPLATE,
        &[("previous_intent", &previous), ("assessment_codes", &codes)],
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub intents: IntentSet,
    pub justification: String,
    pub degraded: bool,
    pub meta: CallMeta,
    pub calls: u32,
}

fn parse_selection(raw: &str) -> Option<(IntentSet, String)> {
    let object = find_object(raw, |m| m.get("intents").is_some_and(Value::is_array))?;
    let mut intents = IntentSet::new();
    for item in object["intents"].as_array().expect("accepted above") {
        match item.as_str().and_then(intent_for_code) {
            Some(i) => {
                intents.insert(i);
            }
            None => tracing::warn!(code = %item, "ignoring unknown intent code from selector"),
        }
    }
    let justification = object
        .get("justification")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Some((intents, justification))
}

pub async fn llm_select_intents(
    backend: &dyn ChatBackend,
    params: &SamplingParams,
    prev: &IntentSet,
    features: &FeatureSet,
) -> Result<Selection, BackendError> {
    let mut request = ChatRequest {
        role: Role::Selector,
        messages: vec![Message::user(build_selector_prompt(prev, features))],
        params: params.clone(),
    };
    let first = backend.complete(&request).await?;
    if let Some((intents, justification)) = parse_selection(&first.content) {
        return Ok(Selection { intents, justification, degraded: false, meta: first.meta, calls: 1 });
    }
    tracing::warn!("selector reply was not valid; asking again");
    request.messages.push(Message::assistant(first.content));
    request.messages.push(Message::user(REASK));
    let second = backend.complete(&request).await?;
    Ok(match parse_selection(&second.content) {
        Some((intents, justification)) => {
            Selection { intents, justification, degraded: false, meta: second.meta, calls: 2 }
        }
        None => Selection {
            intents: IntentSet::new(),
            justification: String::new(),
            degraded: true,
            meta: second.meta,
            calls: 2,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ReplayBackend, RoleProfiles};
    use crate::domain::parse_feature_letters as fs;

    async fn select(responses: &[&str]) -> Selection {
        let b = ReplayBackend::from_responses(responses.iter().copied());
        llm_select_intents(&b, &RoleProfiles::default().selector, &IntentSet::new(), &fs("a"))
            .await
            .unwrap()
    }

    #[tokio::test]
    async fn maps_codes() {
        let s = select(&[r#""justification": "stuck", "intents": ["S_HINT"]}"#]).await;
        assert_eq!(s.intents, [Intent::Hint].into());
        assert_eq!(s.justification, "stuck");
        let s = select(&[r#"{"intents": ["P_REFLECTION", "G_GREETINGS"]}"#]).await;
        assert_eq!(s.intents, [Intent::SelfReflect, Intent::Greetings].into());
    }

    #[tokio::test]
    async fn unknown_codes_are_dropped() {
        let s = select(&[r#"{"justification": "", "intents": ["X_FOO"]}"#]).await;
        assert!(s.intents.is_empty());
        assert!(!s.degraded);
    }

    #[tokio::test]
    async fn double_failure_is_empty() {
        let s = select(&["no", "nope"]).await;
        assert!(s.intents.is_empty());
        assert!(s.degraded);
        assert_eq!(s.calls, 2);
    }

    #[test]
    fn every_code_maps_back() {
        for (code, intent) in SELECTOR_CODES {
            assert_eq!(intent_for_code(code), Some(intent));
            assert_eq!(code_for_intent(intent), Some(code));
        }
        assert_eq!(intent_for_code("s_state"), Some(Intent::State));
    }

    #[test]
    fn prompt_placeholders() {
        let p = build_selector_prompt(&[Intent::SeekStrategy, Intent::Hint].into(), &fs("af"));
        assert!(p.contains("were: S_STRATEGY, S_HINT.\n"));
        assert!(p.contains("message is: a, f.\n"));
        assert!(p.ends_with("##\n{"));
        let p = build_selector_prompt(&IntentSet::new(), &FeatureSet::new());
        assert!(p.contains("were: none."));
        assert!(p.contains("message is: none."));
    }
}
