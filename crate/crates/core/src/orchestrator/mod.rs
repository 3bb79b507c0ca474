//! Tutoring sessions and the per-turn pipeline.
//!
//! Each student message runs, depending on the session [`Version`]:
//!
//! * `V1`: state tracing, graph-based intent selection, steering, tutor call;
//! * `V2`: the tutor alone, on the bare base prompt;
//! * `V3`: the tutor with one constant intent;
//! * `V4`: state tracing, LLM-based intent selection, steering, tutor call.
//!
//! A turn is computed on a copy of the session and committed only once the
//! tutor reply exists and the trace file is written, so a failed turn leaves
//! the session untouched.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::backend::{BackendError, CallMeta, ChatBackend, ChatRequest, Message, Role, RoleProfiles};
use crate::dataset::{Corpus, DatasetError};
use crate::domain::{DialogHistory, FeatureSet, Grounding, Intent, IntentSet};
use crate::steering::build_system_prompt;
use crate::strategy::StrategyGraph;
use crate::tracer::{self, TracerError, TracerExchange, TracerVariant};

mod selector;
mod store;

pub use selector::{build_selector_prompt, code_for_intent, intent_for_code, llm_select_intents, Selection, SELECTOR_CODES};
pub use store::TraceStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Version {
    /// Tracing plus the expert transition graph.
    V1StratL,
    /// No intents at all.
    V2NoIntent,
    /// The same intent every turn.
    V3ConstantIntent(Intent),
    /// Tracing plus intents chosen by an LLM.
    V4LlmIntent,
}

impl Version {
    pub const ALL: [Version; 4] = [
        Version::V1StratL,
        Version::V2NoIntent,
        Version::V3ConstantIntent(Intent::SeekStrategy),
        Version::V4LlmIntent,
    ];

    pub fn traces_state(self) -> bool {
        matches!(self, Version::V1StratL | Version::V4LlmIntent)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Version::V1StratL => f.write_str("V1"),
            Version::V2NoIntent => f.write_str("V2"),
            Version::V3ConstantIntent(Intent::SeekStrategy) => f.write_str("V3"),
            Version::V3ConstantIntent(i) => write!(f, "V3:{i}"),
            Version::V4LlmIntent => f.write_str("V4"),
        }
    }
}

impl FromStr for Version {
    type Err = String;

    /// Accepts `V1`..`V4` (any case) and `V3:<Intent>` for a non-default
    /// constant intent.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, intent) = match s.split_once(':') {
            Some((h, i)) => (h, Some(i)),
            None => (s, None),
        };
        let version = match head.to_ascii_uppercase().as_str() {
            "V1" => Version::V1StratL,
            "V2" => Version::V2NoIntent,
            "V3" => Version::V3ConstantIntent(Intent::SeekStrategy),
            "V4" => Version::V4LlmIntent,
            _ => return Err(format!("unknown version `{s}` (expected V1, V2, V3 or V4)")),
        };
        match (version, intent) {
            (v, None) => Ok(v),
            (Version::V3ConstantIntent(_), Some(i)) => {
                Ok(Version::V3ConstantIntent(i.parse().map_err(|e| format!("{e}"))?))
            }
            _ => Err(format!("only V3 takes an intent, got `{s}`")),
        }
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
}

/// A backend stage within one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCall {
    #[serde(flatten)]
    pub meta: CallMeta,
    /// Backend calls made by the stage, including a re-ask.
    pub calls: u32,
    pub degraded: bool,
}

/// Audit record of one student turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnTrace {
    /// Index of the turn holding the student utterance that was assessed.
    pub turn_index: usize,
    pub version: Version,
    pub student_text: String,
    pub features: FeatureSet,
    pub justification: String,
    pub intents: IntentSet,
    pub system_prompt: String,
    pub tutor_text: String,
    pub tracer: Option<StageCall>,
    pub selector: Option<StageCall>,
    pub tutor: CallMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub grounding: Grounding,
    pub version: Version,
    pub history: DialogHistory,
    pub prev_intents: IntentSet,
    #[serde(skip)]
    pub tracer_state: Vec<TracerExchange>,
    pub status: SessionStatus,
    pub created_at: u64,
    #[serde(skip)]
    pub traces: Vec<TurnTrace>,
}

impl Session {
    pub fn student_turns(&self) -> usize {
        self.traces.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub profiles: RoleProfiles,
    pub tracer_variant: TracerVariant,
    /// The tutor sends the first message of each session.
    pub tutor_opens: bool,
    /// Keep processing student messages once the farewell intent fired.
    pub continue_after_completion: bool,
    /// Maximum number of student turns per session.
    pub max_turns: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            profiles: RoleProfiles::default(),
            tracer_variant: TracerVariant::Full,
            tutor_opens: false,
            continue_after_completion: true,
            max_turns: None,
        }
    }
}

/// Per-session overrides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    pub session_id: Option<String>,
    pub tutor_opens: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    UnknownProblem(DatasetError),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("session is completed")]
    SessionCompleted,
    #[error("session reached its limit of {0} turns")]
    TurnLimit(usize),
    #[error("student message is empty")]
    EmptyMessage,
    #[error("cannot persist trace: {0}")]
    Persist(#[from] std::io::Error),
}

impl From<TracerError> for EngineError {
    fn from(e: TracerError) -> Self {
        match e {
            TracerError::Backend(b) => EngineError::Backend(b),
            // the student text is attached before tracing, so this cannot happen
            TracerError::EmptyHistory => EngineError::EmptyMessage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub tutor_text: String,
    pub trace: TurnTrace,
}

pub struct Engine {
    backend: Arc<dyn ChatBackend>,
    graph: Arc<StrategyGraph>,
    corpus: Arc<Corpus>,
    config: EngineConfig,
    store: Option<TraceStore>,
}

impl Engine {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        graph: Arc<StrategyGraph>,
        corpus: Arc<Corpus>,
        config: EngineConfig,
    ) -> Self {
        Engine { backend, graph, corpus, config, store: None }
    }

    pub fn with_store(mut self, store: TraceStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> Option<&TraceStore> {
        self.store.as_ref()
    }

    pub async fn create_session(
        &self,
        problem_id: &str,
        version: Version,
        options: SessionOptions,
    ) -> Result<Session, EngineError> {
        let problem = self.corpus.get(problem_id).map_err(EngineError::UnknownProblem)?;
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let mut session = Session {
            id: options.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
            grounding: problem.grounding(),
            version,
            history: DialogHistory::new(),
            prev_intents: self.graph.initial_intents.clone(),
            tracer_state: Vec::new(),
            status: SessionStatus::Active,
            created_at,
            traces: Vec::new(),
        };
        if options.tutor_opens.unwrap_or(self.config.tutor_opens) {
            let intents = self.reply_intents_for_opening(version);
            let system_prompt = build_system_prompt(&session.grounding, &intents);
            let request = self.config.profiles.request(Role::Tutor, vec![Message::system(system_prompt)]);
            let reply = self.backend.complete(&request).await?;
            let turn = session.history.push(reply.content, "");
            turn.intents = intents.clone();
            session.prev_intents = intents;
        }
        Ok(session)
    }

    fn reply_intents_for_opening(&self, version: Version) -> IntentSet {
        match version {
            Version::V2NoIntent => IntentSet::new(),
            Version::V3ConstantIntent(i) => [i].into(),
            _ => self.graph.initial_intents.clone(),
        }
    }

    /// Processes one student message and returns the tutor's reply.
    pub async fn student_turn(&self, session: &mut Session, text: &str) -> Result<TurnOutcome, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::EmptyMessage);
        }
        if session.status == SessionStatus::Completed && !self.config.continue_after_completion {
            return Err(EngineError::SessionCompleted);
        }
        if let Some(max) = self.config.max_turns {
            if session.student_turns() >= max {
                return Err(EngineError::TurnLimit(max));
            }
        }

        let mut next = session.clone();
        match next.history.last_mut() {
            Some(turn) if turn.student_text.is_empty() => turn.student_text = text.to_string(),
            _ => {
                next.history.push("", text);
            }
        }
        let turn_index = next.history.len();
        let profiles = &self.config.profiles;

        let (features, justification, tracer_stage) = if next.version.traces_state() {
            let out = tracer::trace(
                self.backend.as_ref(),
                &next.grounding,
                &next.history,
                self.config.tracer_variant,
                &profiles.tracer,
                &next.tracer_state,
            )
            .await?;
            next.tracer_state.push(out.exchange);
            let stage = StageCall { meta: out.meta, calls: out.calls, degraded: out.assessment.degraded };
            (out.assessment.features, out.assessment.justification, Some(stage))
        } else {
            (FeatureSet::new(), String::new(), None)
        };

        let (intents, selector_stage) = match next.version {
            Version::V1StratL => (self.graph.select_intents(&next.prev_intents, &features), None),
            Version::V2NoIntent => (IntentSet::new(), None),
            Version::V3ConstantIntent(i) => ([i].into(), None),
            Version::V4LlmIntent => {
                let s = llm_select_intents(self.backend.as_ref(), &profiles.selector, &next.prev_intents, &features)
                    .await?;
                let stage = StageCall { meta: s.meta, calls: s.calls, degraded: s.degraded };
                (s.intents, Some(stage))
            }
        };

        let system_prompt = build_system_prompt(&next.grounding, &intents);
        let request = tutor_request(profiles, &system_prompt, &next.history);
        let reply = self.backend.complete(&request).await?;

        {
            let turn = next.history.last_mut().expect("student turn attached above");
            turn.features = features.clone();
            if tracer_stage.is_some() {
                turn.justification = Some(justification.clone());
            }
        }
        next.history.push(reply.content.clone(), "").intents = intents.clone();
        next.prev_intents = intents.clone();
        if intents.contains(&Intent::Greetings) {
            next.status = SessionStatus::Completed;
        }
        let trace = TurnTrace {
            turn_index,
            version: next.version,
            student_text: text.to_string(),
            features,
            justification,
            intents,
            system_prompt,
            tutor_text: reply.content.clone(),
            tracer: tracer_stage,
            selector: selector_stage,
            tutor: reply.meta,
        };
        next.traces.push(trace.clone());
        if let Some(store) = &self.store {
            store.save(&next.id, &next.traces)?;
        }
        *session = next;
        Ok(TurnOutcome { tutor_text: reply.content, trace })
    }
}

/// The tutor sees its system prompt and the dialog as chat messages: its
/// own utterances as `assistant`, the student's as `user`.
pub fn tutor_request(profiles: &RoleProfiles, system_prompt: &str, history: &DialogHistory) -> ChatRequest {
    let mut messages = vec![Message::system(system_prompt)];
    for turn in history.turns() {
        if !turn.tutor_text.is_empty() {
            messages.push(Message::assistant(turn.tutor_text.clone()));
        }
        if !turn.student_text.is_empty() {
            messages.push(Message::user(turn.student_text.clone()));
        }
    }
    profiles.request(Role::Tutor, messages)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_strings() {
        for v in Version::ALL {
            assert_eq!(v.to_string().parse::<Version>().unwrap(), v);
        }
        assert_eq!("v3".parse::<Version>().unwrap(), Version::V3ConstantIntent(Intent::SeekStrategy));
        assert_eq!("V3:Hint".parse::<Version>().unwrap(), Version::V3ConstantIntent(Intent::Hint));
        assert_eq!(Version::V3ConstantIntent(Intent::Hint).to_string(), "V3:Hint");
        assert!("V5".parse::<Version>().is_err());
        assert!("V1:Hint".parse::<Version>().is_err());
    }

    #[test]
    fn tutor_request_maps_speakers() {
        let h = DialogHistory::from_pairs([("", "hi"), ("hello", "help")]);
        let r = tutor_request(&RoleProfiles::default(), "SYS", &h);
        let roles: Vec<_> = r.messages.iter().map(|m| m.role).collect();
        use crate::backend::MessageRole::*;
        assert_eq!(roles, vec![System, User, Assistant, User]);
        assert_eq!((r.params.temperature, r.params.top_p), (1.0, 1.0));
    }
}
