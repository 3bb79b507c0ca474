use std::sync::Mutex;

use async_trait::async_trait;

use super::{BackendError, ChatBackend, ChatRequest, Completion, FixtureRecord, Role};

#[derive(Debug, Clone)]
pub struct RecordedCall {
    pub request: ChatRequest,
    pub result: Result<String, BackendError>,
}

/// Wraps a backend and keeps every request it sees, for call accounting
/// and for turning a live run into a replay fixture.
pub struct RecordingBackend<B> {
    inner: B,
    calls: Mutex<Vec<RecordedCall>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn count(&self, role: Role) -> usize {
        self.calls
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.request.role == role)
            .count()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.calls.lock().unwrap().iter().map(|c| c.request.role).collect()
    }

    /// Successful calls as fixture records, with fingerprints.
    pub fn to_fixture(&self) -> Vec<FixtureRecord> {
        self.calls
            .lock()
            .unwrap()
            .iter()
            .filter_map(|c| {
                c.result.as_ref().ok().map(|content| FixtureRecord {
                    role_lane: Some(c.request.role),
                    content: content.clone(),
                    fingerprint: Some(c.request.fingerprint()),
                })
            })
            .collect()
    }
}

#[async_trait]
impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let result = self.inner.complete(request).await;
        self.calls.lock().unwrap().push(RecordedCall {
            request: request.clone(),
            result: result.as_ref().map(|c| c.content.clone()).map_err(Clone::clone),
        });
        result
    }
}
