use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{BackendError, CallMeta, ChatBackend, ChatRequest, Completion, Role};

/// One line of a replay fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_lane: Option<Role>,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture line {line}: {source}")]
    Format {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Deterministic backend that answers from a recorded queue.
///
/// Records carrying a `role_lane` form one queue per role; records without
/// one form a shared queue used by roles that have no lane of their own.
/// In strict mode, recorded fingerprints are compared against the incoming
/// request.
#[derive(Debug)]
pub struct ReplayBackend {
    lanes: Mutex<HashMap<Option<Role>, VecDeque<FixtureRecord>>>,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        let mut lanes: HashMap<Option<Role>, VecDeque<FixtureRecord>> = HashMap::new();
        for r in records {
            lanes.entry(r.role_lane).or_default().push_back(r);
        }
        ReplayBackend {
            lanes: Mutex::new(lanes),
            strict: false,
        }
    }

    /// Shared-lane backend answering with `responses` in order.
    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(responses.into_iter().map(|c| FixtureRecord {
            role_lane: None,
            content: c.into(),
            fingerprint: None,
        }))
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Parses line-delimited fixture records; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|source| FixtureError::Format {
                line: i + 1,
                source,
            })?;
            records.push(record);
        }
        Ok(Self::new(records))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn remaining(&self, role: Role) -> usize {
        let lanes = self.lanes.lock().unwrap();
        let key = if lanes.contains_key(&Some(role)) { Some(role) } else { None };
        lanes.get(&key).map_or(0, VecDeque::len)
    }

    fn draw(&self, request: &ChatRequest) -> Result<FixtureRecord, BackendError> {
        let mut lanes = self.lanes.lock().unwrap();
        let key = if lanes.contains_key(&Some(request.role)) {
            Some(request.role)
        } else {
            None
        };
        let lane_name = key.map_or("shared", Role::as_str).to_string();
        let queue = lanes
            .get_mut(&key)
            .ok_or_else(|| BackendError::ExhaustedFixture { lane: lane_name.clone() })?;
        let record = queue
            .front()
            .ok_or(BackendError::ExhaustedFixture { lane: lane_name })?;
        if self.strict {
            if let Some(expected) = &record.fingerprint {
                let actual = request.fingerprint();
                if *expected != actual {
                    return Err(BackendError::FingerprintMismatch {
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
        }
        Ok(queue.pop_front().expect("front checked"))
    }
}

#[async_trait]
impl ChatBackend for ReplayBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let record = self.draw(request)?;
        Ok(Completion {
            content: record.content,
            meta: CallMeta {
                latency_ms: 0,
                model: request.params.model.clone(),
                attempt: 1,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Message, RoleProfiles};

    fn req(role: Role, text: &str) -> ChatRequest {
        RoleProfiles::default().request(role, vec![Message::user(text)])
    }

    #[tokio::test]
    async fn answers_in_order_then_exhausts() {
        let b = ReplayBackend::from_responses(["one", "two", "three", "four"]);
        for want in ["one", "two", "three", "four"] {
            let c = b.complete(&req(Role::Tutor, "x")).await.unwrap();
            assert_eq!(c.content, want);
            assert_eq!(c.meta.attempt, 1);
        }
        assert_eq!(
            b.complete(&req(Role::Tutor, "x")).await,
            Err(BackendError::ExhaustedFixture { lane: "shared".into() })
        );
    }

    #[tokio::test]
    async fn lanes_do_not_interleave() {
        let b = ReplayBackend::parse(
            r#"{"role_lane":"tutor","content":"T1"}
{"role_lane":"tracer","content":"S1"}
{"role_lane":"tutor","content":"T2"}

{"role_lane":"tracer","content":"S2"}"#,
        )
        .unwrap();
        assert_eq!(b.complete(&req(Role::Tracer, "")).await.unwrap().content, "S1");
        assert_eq!(b.complete(&req(Role::Tracer, "")).await.unwrap().content, "S2");
        assert_eq!(b.complete(&req(Role::Tutor, "")).await.unwrap().content, "T1");
        assert_eq!(b.complete(&req(Role::Tutor, "")).await.unwrap().content, "T2");
        assert!(matches!(
            b.complete(&req(Role::Student, "")).await,
            Err(BackendError::ExhaustedFixture { .. })
        ));
    }

    #[tokio::test]
    async fn strict_mode_checks_fingerprints() {
        let recorded = req(Role::Tutor, "hello");
        let make = || {
            ReplayBackend::new([FixtureRecord {
                role_lane: Some(Role::Tutor),
                content: "ok".into(),
                fingerprint: Some(recorded.fingerprint()),
            }])
        };
        let strict = make().strict(true);
        assert!(matches!(
            strict.complete(&req(Role::Tutor, "hello there")).await,
            Err(BackendError::FingerprintMismatch { .. })
        ));
        assert_eq!(strict.complete(&recorded).await.unwrap().content, "ok");
        // lenient mode ignores the recorded fingerprint
        assert_eq!(make().complete(&req(Role::Tutor, "other")).await.unwrap().content, "ok");
    }

    #[test]
    fn malformed_fixture_reports_line() {
        let err = ReplayBackend::parse("{\"content\":\"a\"}\nnot json").unwrap_err();
        assert!(matches!(err, FixtureError::Format { line: 2, .. }));
        let err = ReplayBackend::parse("{\"content\":\"a\",\"extra\":1}").unwrap_err();
        assert!(matches!(err, FixtureError::Format { line: 1, .. }));
    }
}
