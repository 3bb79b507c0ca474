use std::fmt;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, CallMeta, ChatBackend, ChatRequest, Completion};

pub const API_KEY_ENV: &str = "STRATL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub retries: u32,
    pub timeout_secs: f64,
    /// Delay before the first retry; doubled on each further attempt.
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            retries: 2,
            timeout_secs: 60.0,
            backoff_ms: 500,
        }
    }
}

/// Live backend speaking the chat-completions JSON protocol.
pub struct HttpBackend {
    client: reqwest::Client,
    config: HttpConfig,
    api_key: Option<String>,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend { client, config, api_key })
    }

    /// Reads the API key from the environment.
    pub fn from_env(config: HttpConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }

    async fn attempt(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": request.params.model,
            "messages": request.messages,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
        });
        let mut builder = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().await.map_err(map_reqwest)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(BackendError::Http { status: status.as_u16(), body });
        }
        let parsed: WireResponse = response
            .json()
            .await
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))
    }
}

fn map_reqwest(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        if self.api_key.is_none() {
            return Err(BackendError::MissingCredentials);
        }
        let started = Instant::now();
        let mut attempt = 1u32;
        loop {
            match self.attempt(request).await {
                Ok(content) => {
                    return Ok(Completion {
                        content,
                        meta: CallMeta {
                            latency_ms: started.elapsed().as_millis() as u64,
                            model: request.params.model.clone(),
                            attempt,
                        },
                    })
                }
                Err(e) if e.is_transient() && attempt <= self.config.retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    tracing::warn!(role = %request.role, attempt, error = %e, "retrying backend call");
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Message, Role, RoleProfiles};
    use axum::extract::State;
    use axum::http::StatusCode;
    use axum::routing::post;
    use axum::{Json, Router};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};

    #[derive(Clone)]
    struct Mock {
        hits: Arc<AtomicUsize>,
        fail_first: usize,
        fail_status: u16,
        bodies: Arc<Mutex<Vec<serde_json::Value>>>,
        auth: Arc<Mutex<Vec<String>>>,
    }

    async fn handler(
        State(mock): State<Mock>,
        headers: axum::http::HeaderMap,
        Json(body): Json<serde_json::Value>,
    ) -> (StatusCode, Json<serde_json::Value>) {
        let n = mock.hits.fetch_add(1, Ordering::SeqCst);
        mock.bodies.lock().unwrap().push(body);
        if let Some(v) = headers.get("authorization") {
            mock.auth.lock().unwrap().push(v.to_str().unwrap().to_string());
        }
        if n < mock.fail_first {
            return (StatusCode::from_u16(mock.fail_status).unwrap(), Json(json!({"error": "boom"})));
        }
        (
            StatusCode::OK,
            Json(json!({"choices": [{"message": {"role": "assistant", "content": "hello"}}]})),
        )
    }

    async fn serve(fail_first: usize, fail_status: u16) -> (String, Mock) {
        let mock = Mock {
            hits: Arc::new(AtomicUsize::new(0)),
            fail_first,
            fail_status,
            bodies: Arc::default(),
            auth: Arc::default(),
        };
        let app = Router::new()
            .route("/v1/chat/completions", post(handler))
            .with_state(mock.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        (format!("http://{addr}/v1/chat/completions"), mock)
    }

    fn backend(endpoint: String, retries: u32) -> HttpBackend {
        let config = HttpConfig {
            endpoint,
            retries,
            timeout_secs: 5.0,
            backoff_ms: 1,
        };
        HttpBackend::new(config, Some("sk-test".into())).unwrap()
    }

    fn request() -> ChatRequest {
        RoleProfiles::default().request(Role::Tracer, vec![Message::system("s"), Message::user("u")])
    }

    #[tokio::test]
    async fn succeeds_on_third_attempt_after_two_server_errors() {
        let (url, mock) = serve(2, 500).await;
        let c = backend(url, 2).complete(&request()).await.unwrap();
        assert_eq!(c.content, "hello");
        assert_eq!(c.meta.attempt, 3);
        assert_eq!(mock.hits.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn gives_up_after_retries() {
        let (url, mock) = serve(10, 503).await;
        let err = backend(url, 2).complete(&request()).await.unwrap_err();
        assert!(matches!(err, BackendError::Http { status: 503, .. }));
        assert_eq!(mock.hits.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn client_errors_are_not_retried() {
        let (url, mock) = serve(10, 400).await;
        let err = backend(url, 2).complete(&request()).await.unwrap_err();
        assert!(matches!(err, BackendError::Http { status: 400, .. }));
        assert_eq!(mock.hits.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn rate_limit_is_retried() {
        let (url, _) = serve(1, 429).await;
        let c = backend(url, 2).complete(&request()).await.unwrap();
        assert_eq!(c.meta.attempt, 2);
    }

    #[tokio::test]
    async fn wire_body_carries_role_params() {
        let (url, mock) = serve(0, 500).await;
        backend(url, 0).complete(&request()).await.unwrap();
        let body = mock.bodies.lock().unwrap()[0].clone();
        assert_eq!(body["model"], "gpt-4o-2024-08-06");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["top_p"], 0.1);
        assert_eq!(body["messages"][0], json!({"role": "system", "content": "s"}));
        assert!(body.get("role").is_none());
        assert_eq!(mock.auth.lock().unwrap()[0], "Bearer sk-test");
    }

    #[tokio::test]
    async fn missing_key_fails_before_any_request() {
        let (url, mock) = serve(0, 500).await;
        let b = HttpBackend::new(HttpConfig { endpoint: url, ..Default::default() }, None).unwrap();
        assert_eq!(b.complete(&request()).await.unwrap_err(), BackendError::MissingCredentials);
        assert_eq!(mock.hits.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn debug_redacts_key() {
        let b = HttpBackend::new(HttpConfig::default(), Some("sk-secret".into())).unwrap();
        let shown = format!("{b:?}");
        assert!(!shown.contains("sk-secret"));
    }
}
