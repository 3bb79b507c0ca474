//! Calls the real model endpoint. Skipped unless `STRATL_LIVE_TESTS=1`;
//! needs `STRATL_API_KEY` and honours `STRATL_ENDPOINT`.

use stratl::backend::{ChatBackend, HttpBackend, HttpConfig, Message, Role, RoleProfiles};

fn enabled() -> bool {
    std::env::var("STRATL_LIVE_TESTS").is_ok_and(|v| v == "1")
}

#[tokio::test]
async fn live_tutor_reply() {
    if !enabled() {
        eprintln!("skipped: set STRATL_LIVE_TESTS=1 to run");
        return;
    }
    let mut config = HttpConfig::default();
    if let Ok(endpoint) = std::env::var("STRATL_ENDPOINT") {
        config.endpoint = endpoint;
    }
    let backend = HttpBackend::from_env(config).expect("STRATL_API_KEY must be set");
    let request = RoleProfiles::default()
        .request(Role::Tutor, vec![Message::system("Reply with one short sentence."), Message::user("Hello")]);
    let reply = backend.complete(&request).await.unwrap();
    assert!(!reply.content.trim().is_empty());
}
