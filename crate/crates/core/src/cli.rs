//! The `stratl` command line.
//!
//! Exit status is 0 on success, 1 when an input fails validation or a run
//! fails, and 2 on usage errors.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::backend::API_KEY_ENV;
use crate::config::{Config, Overrides};
use crate::eval::{
    evaluate_tracer, load_annotations, load_gold, run_simulations, score_annotations, score_report, simulation_table,
    SimulationPlan, StudentPersona,
};
use crate::orchestrator::{SessionOptions, SessionStatus, Version};
use crate::strategy::{validate_graph, GraphDocument, Severity, PRODUCTIVE_FAILURE_GRAPH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stratl", version, about = "Steer an LLM tutor along a multi-turn tutoring strategy")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "F")]
    pub config: Option<PathBuf>,
    /// Replay fixture (JSONL) to use instead of the live backend.
    #[arg(long, global = true, value_name = "F")]
    pub replay: Option<PathBuf>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Model for every role.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, value_name = "F")]
    pub graph: Option<PathBuf>,
    #[arg(long, global = true, value_name = "F")]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub trace_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// Let the tutor send the first message.
    #[arg(long, global = true)]
    pub tutor_opens: bool,
    /// Maximum student turns per session.
    #[arg(long, global = true)]
    pub max_turns: Option<usize>,
    /// Tracer variant: full, no-justification or short-memory.
    #[arg(long, global = true)]
    pub variant: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Tutor session in the terminal.
    Chat {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "V1")]
        version: Version,
    },
    /// Run simulated-student sessions for every cell of a plan.
    Simulate {
        #[arg(long, value_name = "F")]
        plan: PathBuf,
        /// Output directory for transcripts and traces.
        #[arg(long, value_name = "DIR", default_value = "simulation")]
        out: PathBuf,
        /// Annotations of the simulated sessions, to fill PF and RSM columns.
        #[arg(long, value_name = "F")]
        annotations: Option<PathBuf>,
        /// Persona prompt file for the simulated student.
        #[arg(long, value_name = "F")]
        persona: Option<PathBuf>,
    },
    /// Check a transition graph file.
    ValidateGraph {
        /// Graph file; the shipped graph when omitted.
        file: Option<PathBuf>,
    },
    /// PF scores and t-tests from annotations.
    Score {
        #[arg(long, value_name = "F")]
        annotations: PathBuf,
    },
    /// Score the state tracer against gold labels.
    EvalTracer {
        #[arg(long, value_name = "F")]
        gold: PathBuf,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            graph: self.graph.clone(),
            corpus: self.corpus.clone(),
            trace_dir: self.trace_dir.clone(),
            replay: self.replay.clone(),
            retries: self.retries,
            tutor_opens: self.tutor_opens.then_some(true),
            max_turns: self.max_turns,
            tracer_variant: self.variant.clone(),
        }
    }
}

/// Parses `argv` (including the program name) and runs the command with the
/// process's standard streams.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdin = std::io::stdin();
    run(argv, &mut stdin.lock(), &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`dispatch`] with explicit streams.
pub fn run<I, T>(argv: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start runtime: {e}");
            return EXIT_FAILURE;
        }
    };
    match runtime.block_on(execute(cli, input, out)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

type Fallible = Result<i32, Box<dyn std::error::Error>>;

fn config_for(global: &GlobalArgs) -> Result<Config, crate::config::ConfigError> {
    Config::layered(global.config.as_deref(), |k| std::env::var(k).ok(), &global.overrides())
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok()
}

async fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Fallible {
    match cli.command {
        Command::ValidateGraph { file } => validate(file, out),
        Command::Serve { port, host } => {
            let config = config_for(&cli.global)?;
            let engine = config.build_engine(config.backend(api_key())?)?;
            crate::service::serve(Arc::new(engine), SocketAddr::new(host, port)).await?;
            Ok(EXIT_OK)
        }
        Command::Chat { problem, version } => {
            let config = config_for(&cli.global)?;
            let engine = config.build_engine(config.backend(api_key())?)?;
            chat(&engine, &problem, version, input, out).await
        }
        Command::Simulate { plan, out: dir, annotations, persona } => {
            let mut global = cli.global;
            global.trace_dir = Some(global.trace_dir.unwrap_or_else(|| dir.join("traces")));
            let config = config_for(&global)?;
            let plan = SimulationPlan::load(&plan)?;
            let backend = config.backend(api_key())?;
            let engine = config.build_engine(backend.clone())?;
            let persona = match persona {
                Some(path) => StudentPersona { template: std::fs::read_to_string(path)?, ..Default::default() },
                None => StudentPersona::default(),
            };
            let cells =
                run_simulations(&plan, &engine, backend.as_ref(), &persona, Some(&dir.join("transcripts"))).await?;
            let scored = match annotations {
                Some(path) => score_annotations(&load_annotations(path)?, engine.corpus())?,
                None => Vec::new(),
            };
            let sessions: usize = cells.iter().map(|c| c.sessions.len()).sum();
            writeln!(out, "{sessions} transcripts in {}", dir.join("transcripts").display())?;
            write!(out, "{}", simulation_table(&cells, &scored).render())?;
            Ok(if cells.iter().any(|c| c.error.is_some()) { EXIT_FAILURE } else { EXIT_OK })
        }
        Command::Score { annotations } => {
            let config = config_for(&cli.global)?;
            let corpus = config.load_corpus()?;
            let scored = score_annotations(&load_annotations(annotations)?, &corpus)?;
            write!(out, "{}", score_report(&scored).render())?;
            Ok(EXIT_OK)
        }
        Command::EvalTracer { gold } => {
            let config = config_for(&cli.global)?;
            let corpus = config.load_corpus()?;
            let records = load_gold(gold)?;
            let backend = config.backend(api_key())?;
            let variant = config.tracer_variant()?;
            let eval = evaluate_tracer(backend.as_ref(), &corpus, &records, variant, &config.profiles.tracer).await?;
            writeln!(out, "tracer variant: {}", config.tracer_variant)?;
            write!(out, "{}", eval.report.render())?;
            if eval.degraded > 0 {
                writeln!(out, "degraded assessments: {}", eval.degraded)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn validate(file: Option<PathBuf>, out: &mut dyn Write) -> Fallible {
    let text = match &file {
        Some(path) => std::fs::read_to_string(path)?,
        None => PRODUCTIVE_FAILURE_GRAPH.to_string(),
    };
    let doc: GraphDocument = match serde_json::from_str(&text) {
        Ok(doc) => doc,
        Err(e) => {
            writeln!(out, "malformed graph document: {e}")?;
            writeln!(out, "1 errors")?;
            return Ok(EXIT_FAILURE);
        }
    };
    let diagnostics = validate_graph(&doc);
    for d in &diagnostics {
        writeln!(out, "{d}")?;
    }
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    let warnings = diagnostics.len() - errors;
    writeln!(out, "{errors} errors, {warnings} warnings")?;
    Ok(if errors == 0 { EXIT_OK } else { EXIT_FAILURE })
}

async fn chat(
    engine: &crate::orchestrator::Engine,
    problem: &str,
    version: Version,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Fallible {
    let mut session = engine.create_session(problem, version, SessionOptions::default()).await?;
    writeln!(out, "session {} ({version})\n\n{}\n", session.id, session.grounding.problem_statement)?;
    if let Some(turn) = session.history.last() {
        writeln!(out, "tutor: {}", turn.tutor_text)?;
    }
    writeln!(out, "Type /quit to leave.")?;
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        if text == "/quit" {
            break;
        }
        if text.is_empty() {
            continue;
        }
        let was_active = session.status == SessionStatus::Active;
        match engine.student_turn(&mut session, text).await {
            Ok(reply) => {
                writeln!(out, "tutor: {}", reply.tutor_text)?;
                if was_active && session.status == SessionStatus::Completed {
                    writeln!(out, "[the tutor has ended the session; /quit to leave]")?;
                }
            }
            Err(e) => writeln!(out, "[turn failed: {e}]")?,
        }
    }
    if let Some(store) = engine.store() {
        if !session.traces.is_empty() {
            writeln!(out, "trace: {}", store.path_for(&session.id).display())?;
        }
    }
    Ok(EXIT_OK)
}
