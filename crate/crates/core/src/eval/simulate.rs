//! Simulated-student batch runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatBackend, Message, Role};
use crate::domain::DialogHistory;
use crate::orchestrator::{Engine, EngineError, SessionOptions, SessionStatus, TurnTrace, Version};
use crate::template;

pub const STUDENT_PERSONA: &str = include_str!("../../resources/prompts/student_persona.txt");
pub const STUDENT_OPENING: &str = include_str!("../../resources/prompts/student_opening.txt");

pub const DEFAULT_MAX_TURNS: usize = 12;

fn default_max_turns() -> usize {
    DEFAULT_MAX_TURNS
}

fn default_runs() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub problems: Vec<String>,
    pub versions: Vec<Version>,
    #[serde(default = "default_runs")]
    pub runs_per_cell: usize,
    /// Maximum number of student turns per session.
    #[serde(default = "default_max_turns")]
    pub max_turns: usize,
}

impl SimulationPlan {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// The simulated student: a persona prompt and the role lane it is served from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentPersona {
    pub template: String,
    pub opening: String,
}

impl Default for StudentPersona {
    fn default() -> Self {
        StudentPersona { template: STUDENT_PERSONA.to_string(), opening: STUDENT_OPENING.to_string() }
    }
}

impl StudentPersona {
    /// The student's view of the dialog: its own utterances are `assistant`
    /// messages, the tutor's are `user` messages.
    pub fn messages(&self, problem_statement: &str, history: &DialogHistory) -> Vec<Message> {
        let mut messages = vec![
            Message::system(template::fill(&self.template, &[("pb", problem_statement)])),
            Message::user(self.opening.clone()),
        ];
        for turn in history.turns() {
            if !turn.tutor_text.is_empty() {
                messages.push(Message::user(turn.tutor_text.clone()));
            }
            if !turn.student_text.is_empty() {
                messages.push(Message::assistant(turn.student_text.clone()));
            }
        }
        messages
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedSession {
    pub session_id: String,
    pub problem: String,
    pub version: Version,
    pub run: usize,
    pub completed: bool,
    pub history: DialogHistory,
    pub traces: Vec<TurnTrace>,
}

impl SimulatedSession {
    pub fn student_turns(&self) -> usize {
        self.traces.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub problem: String,
    pub version: Version,
    pub sessions: Vec<SimulatedSession>,
    /// Set when a backend failure stopped the cell early.
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write transcript: {0}")]
    Io(#[from] std::io::Error),
}

/// File-safe session id for a cell run, e.g. `country-V3_Hint-2`.
pub fn session_id(problem: &str, version: Version, run: usize) -> String {
    format!("{problem}-{version}-{run}").replace(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'), "_")
}

/// Runs every (problem, version) cell of the plan in order. Each session
/// ends when the tutor says goodbye or after `max_turns` student turns. A
/// backend failure abandons the rest of its cell and the run moves on.
pub async fn run_simulations(
    plan: &SimulationPlan,
    engine: &Engine,
    student: &dyn ChatBackend,
    persona: &StudentPersona,
    transcripts_dir: Option<&Path>,
) -> Result<Vec<CellResult>, SimulationError> {
    for problem in &plan.problems {
        engine.corpus().get(problem).map_err(EngineError::UnknownProblem)?;
    }
    let mut cells = Vec::new();
    for problem in &plan.problems {
        for &version in &plan.versions {
            let mut cell = CellResult { problem: problem.clone(), version, sessions: Vec::new(), error: None };
            for run in 1..=plan.runs_per_cell {
                match simulate_one(plan, engine, student, persona, problem, version, run).await {
                    Ok(session) => {
                        if let Some(dir) = transcripts_dir {
                            write_transcript(dir, &session)?;
                        }
                        cell.sessions.push(session);
                    }
                    Err(SimulationError::Engine(EngineError::Backend(e))) => {
                        tracing::warn!(%problem, %version, run, error = %e, "backend failure; abandoning cell");
                        cell.error = Some(e.to_string());
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

async fn simulate_one(
    plan: &SimulationPlan,
    engine: &Engine,
    student: &dyn ChatBackend,
    persona: &StudentPersona,
    problem: &str,
    version: Version,
    run: usize,
) -> Result<SimulatedSession, SimulationError> {
    let id = session_id(problem, version, run);
    let options = SessionOptions { session_id: Some(id.clone()), tutor_opens: None };
    let mut session = engine.create_session(problem, version, options).await?;
    while session.student_turns() < plan.max_turns && session.status == SessionStatus::Active {
        let request = engine.config().profiles.request(
            Role::Student,
            persona.messages(&session.grounding.problem_statement, &session.history),
        );
        let reply = student.complete(&request).await.map_err(EngineError::Backend)?;
        if reply.content.trim().is_empty() {
            let e = BackendError::MalformedResponse("empty student utterance".into());
            return Err(EngineError::Backend(e).into());
        }
        engine.student_turn(&mut session, &reply.content).await?;
    }
    Ok(SimulatedSession {
        session_id: id,
        problem: problem.to_string(),
        version,
        run,
        completed: session.status == SessionStatus::Completed,
        history: session.history,
        traces: session.traces,
    })
}

fn write_transcript(dir: &Path, session: &SimulatedSession) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.json", session.session_id));
    let mut text = serde_json::to_string_pretty(session).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
