use std::sync::Arc;

use stratl::backend::{FixtureRecord, RecordingBackend, ReplayBackend, Role};
use stratl::dataset::Corpus;
use stratl::domain::Intent;
use stratl::eval::{run_simulations, SimulationPlan, StudentPersona};
use stratl::orchestrator::{Engine, EngineConfig, EngineError, SessionOptions, SessionStatus, TraceStore, Version};
use stratl::StrategyGraph;

fn records(role: Role, items: impl IntoIterator<Item = String>) -> Vec<FixtureRecord> {
    items.into_iter().map(|c| FixtureRecord { role_lane: Some(role), content: c, fingerprint: None }).collect()
}

fn tracer(letters: &str) -> String {
    format!(r#"{{"justification": "", "selection": "{letters}"}}"#)
}

fn engine(records: Vec<FixtureRecord>, config: EngineConfig) -> Engine {
    Engine::new(
        Arc::new(ReplayBackend::new(records)),
        Arc::new(StrategyGraph::productive_failure()),
        Arc::new(Corpus::shipped()),
        config,
    )
}

#[tokio::test]
async fn unknown_problem() {
    let e = engine(vec![], EngineConfig::default());
    let err = e.create_session("nope", Version::V1StratL, SessionOptions::default()).await.unwrap_err();
    assert!(matches!(err, EngineError::UnknownProblem(_)));
    let s = e.create_session("consistency", Version::V1StratL, SessionOptions::default()).await.unwrap();
    assert!(s.prev_intents.is_empty());
    assert_eq!(s.status, SessionStatus::Active);
}

#[tokio::test]
async fn self_reflect_then_goodbye() {
    let mut r = records(Role::Tracer, [tracer("k"), tracer(""), tracer("d")]);
    r.extend(records(Role::Tutor, ["Can you sum up?".into(), "Bye!".into(), "Sure.".into()]));
    let e = engine(r, EngineConfig::default());
    let mut s = e.create_session("country", Version::V1StratL, SessionOptions::default()).await.unwrap();
    let t = e.student_turn(&mut s, "Done, D gets the last seat.").await.unwrap().trace;
    assert_eq!(t.intents, [Intent::SelfReflect].into());
    assert!(t.system_prompt.ends_with("general implications and connections."));
    let t = e.student_turn(&mut s, "It was about remainders.").await.unwrap().trace;
    assert_eq!(t.intents, [Intent::Greetings].into());
    assert_eq!(s.status, SessionStatus::Completed);
    // completion is advisory; the graph continues from Greetings
    let t = e.student_turn(&mut s, "one more thing").await.unwrap().trace;
    assert_eq!(t.intents, [Intent::SeekStrategy].into());
}

#[tokio::test]
async fn completion_can_be_final() {
    let mut r = records(Role::Tracer, [tracer("")]);
    r.extend(records(Role::Tutor, ["Bye!".into()]));
    let config = EngineConfig { continue_after_completion: false, ..Default::default() };
    let e = engine(r, config);
    let mut s = e.create_session("country", Version::V3ConstantIntent(Intent::Greetings), SessionOptions::default()).await.unwrap();
    e.student_turn(&mut s, "bye").await.unwrap();
    assert!(matches!(e.student_turn(&mut s, "hello?").await, Err(EngineError::SessionCompleted)));
}

#[tokio::test]
async fn turn_limit_and_empty_message() {
    let e = engine(records(Role::Tutor, ["a".into(), "b".into()]), EngineConfig { max_turns: Some(1), ..Default::default() });
    let mut s = e.create_session("country", Version::V2NoIntent, SessionOptions::default()).await.unwrap();
    assert!(matches!(e.student_turn(&mut s, " \n").await, Err(EngineError::EmptyMessage)));
    e.student_turn(&mut s, "hi").await.unwrap();
    assert!(matches!(e.student_turn(&mut s, "again").await, Err(EngineError::TurnLimit(1))));
}

#[tokio::test]
async fn failed_turn_leaves_session_untouched() {
    // the tracer answers but the tutor lane is empty
    let e = engine(records(Role::Tracer, [tracer("g")]), EngineConfig::default());
    let mut s = e.create_session("country", Version::V1StratL, SessionOptions::default()).await.unwrap();
    let before = s.clone();
    assert!(matches!(e.student_turn(&mut s, "help").await, Err(EngineError::Backend(_))));
    assert_eq!(s, before);
}

#[tokio::test]
async fn tutor_sees_the_dialog() {
    let mut r = records(Role::Tutor, ["Hello, ready?".into(), "Go on.".into()]);
    r.extend(records(Role::Tracer, [tracer("d")]));
    let recorder = Arc::new(RecordingBackend::new(ReplayBackend::new(r)));
    let e = Engine::new(
        recorder.clone(),
        Arc::new(StrategyGraph::productive_failure()),
        Arc::new(Corpus::shipped()),
        EngineConfig { tutor_opens: true, ..Default::default() },
    );
    let mut s = e.create_session("consistency", Version::V1StratL, SessionOptions::default()).await.unwrap();
    assert_eq!(s.history.len(), 1);
    let out = e.student_turn(&mut s, "Maybe the average?").await.unwrap();
    assert_eq!(out.trace.turn_index, 1);
    assert_eq!(out.trace.intents, [Intent::SeekStrategy].into());
    let calls = recorder.calls();
    let tutor = &calls.last().unwrap().request;
    let contents: Vec<&str> = tutor.messages.iter().map(|m| m.content.as_str()).collect();
    assert_eq!(&contents[1..], ["Hello, ready?", "Maybe the average?"]);
    assert_eq!(tutor.params, EngineConfig::default().profiles.tutor);
    let tracer_call = calls.iter().find(|c| c.request.role == Role::Tracer).unwrap();
    assert_eq!(tracer_call.request.params, EngineConfig::default().profiles.tracer);
    assert!(tracer_call.request.messages[0].content.contains("Tutor: Hello, ready?\nStudent: Maybe the average?"));
}

#[tokio::test]
async fn traces_persist_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = records(Role::Tracer, [tracer("a"), tracer("a")]);
    r.extend(records(Role::Tutor, ["Check step 2.".into(), "Look at the divisor.".into()]));
    let store = TraceStore::new(dir.path());
    let e = engine(r, EngineConfig::default()).with_store(store.clone());
    let options = SessionOptions { session_id: Some("s1".into()), tutor_opens: None };
    let mut s = e.create_session("country", Version::V1StratL, options).await.unwrap();
    e.student_turn(&mut s, "6400 seats").await.unwrap();
    e.student_turn(&mut s, "still 6400").await.unwrap();
    let loaded = store.load("s1").unwrap();
    assert_eq!(loaded, s.traces);
    assert_eq!(loaded[1].intents, [Intent::Correct].into());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["s1.jsonl"]);
    let first_line = std::fs::read_to_string(store.path_for("s1")).unwrap();
    assert!(first_line.starts_with(r#"{"turn_index":1,"version":"V1","student_text":"6400 seats","features":["a"]"#));
}

#[tokio::test]
async fn simulation_respects_max_turns() {
    // a student who never finishes and a tracer that never sees a solution
    let mut r = records(Role::Student, (0..100).map(|i| format!("try {i}")));
    r.extend(records(Role::Tutor, (0..100).map(|i| format!("reply {i}"))));
    r.extend(records(Role::Tracer, (0..100).map(|_| tracer("d"))));
    let backend = Arc::new(ReplayBackend::new(r));
    let e = Engine::new(
        backend.clone(),
        Arc::new(StrategyGraph::productive_failure()),
        Arc::new(Corpus::shipped()),
        EngineConfig::default(),
    );
    let plan = SimulationPlan { problems: vec!["country".into()], versions: vec![Version::V1StratL], runs_per_cell: 2, max_turns: 12 };
    let cells = run_simulations(&plan, &e, backend.as_ref(), &StudentPersona::default(), None).await.unwrap();
    assert_eq!(cells[0].sessions.len(), 2);
    for s in &cells[0].sessions {
        assert_eq!(s.student_turns(), 12);
        assert!(!s.completed);
    }
}

#[tokio::test]
async fn backend_failure_aborts_only_its_cell() {
    // enough student and tutor replies for one V2 session of 2 turns, nothing else
    let mut r = records(Role::Student, ["a".into(), "b".into()]);
    r.extend(records(Role::Tutor, ["x".into(), "y".into()]));
    let backend = Arc::new(ReplayBackend::new(r));
    let e = Engine::new(
        backend.clone(),
        Arc::new(StrategyGraph::productive_failure()),
        Arc::new(Corpus::shipped()),
        EngineConfig::default(),
    );
    let plan = SimulationPlan {
        problems: vec!["country".into()],
        versions: vec![Version::V2NoIntent, Version::V3ConstantIntent(Intent::SeekStrategy)],
        runs_per_cell: 2,
        max_turns: 2,
    };
    let cells = run_simulations(&plan, &e, backend.as_ref(), &StudentPersona::default(), None).await.unwrap();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[0].sessions.len(), 1);
    assert!(cells[0].error.is_some());
    assert!(cells[1].sessions.is_empty() && cells[1].error.is_some());
}
