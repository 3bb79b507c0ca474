//! Evaluation: classifier metrics, PF scores, significance tests and
//! simulated-student runs.

mod metrics;
mod pf;
mod report;
mod simulate;
mod tracer_eval;
mod ttest;

pub use metrics::{classification_metrics, Counts, LabelReport, LengthMismatch, MetricsReport, Scores};
pub use pf::{
    compute_pf_score, load_annotations, parse_annotations, AnnotationError, ConversationAnnotation, RubricMismatch,
    StepStatus,
};
pub use report::{score_annotations, score_report, simulation_table, Comparison, ReportError, ScoreReport, ScoredConversation, Table};
pub use simulate::{
    run_simulations, session_id, CellResult, SimulatedSession, SimulationError, SimulationPlan, StudentPersona,
    DEFAULT_MAX_TURNS, STUDENT_OPENING, STUDENT_PERSONA,
};
pub use ttest::{ln_gamma, reg_inc_beta, t_two_sided_p, two_sample_t_test, TTest, TTestError};
pub use tracer_eval::{evaluate_tracer, load_gold, parse_gold, GoldRecord, TracerEvalError, TracerEvaluation};
