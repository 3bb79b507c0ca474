//! Plain-text result tables.

use std::collections::{BTreeMap, HashMap};

use super::pf::{compute_pf_score, ConversationAnnotation, RubricMismatch};
use super::simulate::CellResult;
use super::ttest::{two_sample_t_test, TTest};
use crate::dataset::{Corpus, DatasetError};
use crate::orchestrator::Version;

/// A table with a header row, rendered with space-aligned columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header)
                    .chain(&self.rows)
                    .map(|r| r.get(c).map_or(0, |s| s.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&line(&rule));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("annotation `{session}`: {source}")]
    Problem { session: String, source: DatasetError },
    #[error("annotation `{session}`: {source}")]
    Rubric { session: String, source: RubricMismatch },
}

/// PF score and RSM count of one annotated conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredConversation {
    pub session_id: String,
    pub problem: String,
    pub version: Option<Version>,
    pub pf_score: f64,
    pub rsm_count: Option<u32>,
}

pub fn score_annotations(
    annotations: &[ConversationAnnotation],
    corpus: &Corpus,
) -> Result<Vec<ScoredConversation>, ReportError> {
    annotations
        .iter()
        .map(|a| {
            let problem = corpus
                .get(&a.problem)
                .map_err(|source| ReportError::Problem { session: a.session_id.clone(), source })?;
            let pf_score = compute_pf_score(a, problem)
                .map_err(|source| ReportError::Rubric { session: a.session_id.clone(), source })?;
            Ok(ScoredConversation {
                session_id: a.session_id.clone(),
                problem: a.problem.clone(),
                version: a.version,
                pf_score,
                rsm_count: a.rsm_count,
            })
        })
        .collect()
}

/// One row per simulated cell; PF and RSM columns are filled from the
/// annotations whose session ids match the cell's sessions.
pub fn simulation_table(cells: &[CellResult], scored: &[ScoredConversation]) -> Table {
    let by_session: HashMap<&str, &ScoredConversation> = scored.iter().map(|s| (s.session_id.as_str(), s)).collect();
    let mut table = Table::new(&[
        "problem", "version", "sessions", "mean turns", "completed", "degraded", "mean PF", "mean RSM", "error",
    ]);
    for cell in cells {
        let turns: Vec<f64> = cell.sessions.iter().map(|s| s.student_turns() as f64).collect();
        let completed = cell.sessions.iter().filter(|s| s.completed).count();
        let degraded = cell
            .sessions
            .iter()
            .flat_map(|s| &s.traces)
            .filter(|t| t.tracer.as_ref().is_some_and(|c| c.degraded) || t.selector.as_ref().is_some_and(|c| c.degraded))
            .count();
        let annotated: Vec<&ScoredConversation> =
            cell.sessions.iter().filter_map(|s| by_session.get(s.session_id.as_str()).copied()).collect();
        let pf: Vec<f64> = annotated.iter().map(|s| s.pf_score).collect();
        let rsm: Vec<f64> = annotated.iter().filter_map(|s| s.rsm_count).map(f64::from).collect();
        table.push(vec![
            cell.problem.clone(),
            cell.version.to_string(),
            cell.sessions.len().to_string(),
            fmt_opt(mean(&turns)),
            completed.to_string(),
            degraded.to_string(),
            fmt_opt(mean(&pf)),
            fmt_opt(mean(&rsm)),
            cell.error.clone().unwrap_or_else(|| "-".into()),
        ]);
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub problem: String,
    pub metric: &'static str,
    pub baseline: Version,
    pub other: Version,
    pub result: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// Mean PF score per problem over all annotations.
    pub per_problem: BTreeMap<String, f64>,
    pub cells: Table,
    pub comparisons: Vec<Comparison>,
}

fn version_label(v: Option<Version>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

type Cell = (Option<Version>, Vec<f64>, Vec<f64>);

/// Means per problem and per (problem, version), plus Welch t-tests of V1
/// against every other version on PF score and RSM count.
pub fn score_report(scored: &[ScoredConversation]) -> ScoreReport {
    let mut per_problem_scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cells: BTreeMap<(String, String), Cell> = BTreeMap::new();
    for s in scored {
        per_problem_scores.entry(s.problem.clone()).or_default().push(s.pf_score);
        let cell = cells
            .entry((s.problem.clone(), version_label(s.version)))
            .or_insert_with(|| (s.version, Vec::new(), Vec::new()));
        cell.1.push(s.pf_score);
        if let Some(r) = s.rsm_count {
            cell.2.push(f64::from(r));
        }
    }
    let per_problem = per_problem_scores
        .into_iter()
        .map(|(p, v)| (p, mean(&v).expect("non-empty by construction")))
        .collect();

    let mut table = Table::new(&["problem", "version", "n", "mean PF", "mean RSM"]);
    for ((problem, version), (_, pf, rsm)) in &cells {
        table.push(vec![problem.clone(), version.clone(), pf.len().to_string(), fmt_opt(mean(pf)), fmt_opt(mean(rsm))]);
    }

    let mut comparisons = Vec::new();
    let baseline = Version::V1StratL;
    for ((problem, _), (version, pf, rsm)) in &cells {
        let Some(other) = version.filter(|v| *v != baseline) else { continue };
        let Some((_, base_pf, base_rsm)) = cells.get(&(problem.clone(), baseline.to_string())) else { continue };
        for (metric, xs, ys) in [("PF", base_pf, pf), ("RSM", base_rsm, rsm)] {
            if metric == "RSM" && xs.is_empty() && ys.is_empty() {
                continue;
            }
            comparisons.push(Comparison {
                problem: problem.clone(),
                metric,
                baseline,
                other,
                result: two_sample_t_test(xs, ys).ok(),
            });
        }
    }
    ScoreReport { per_problem, cells: table, comparisons }
}

impl ScoreReport {
    pub fn render(&self) -> String {
        let mut out = String::from("mean PF score per problem\n");
        for (problem, score) in &self.per_problem {
            out.push_str(&format!("  {problem}: {score:.3}\n"));
        }
        out.push('\n');
        out.push_str(&self.cells.render());
        if !self.comparisons.is_empty() {
            out.push('\n');
            let mut t = Table::new(&["problem", "metric", "comparison", "t", "df", "p"]);
            for c in &self.comparisons {
                let (tv, df, p) = match c.result {
                    Some(r) => (format!("{:.3}", r.t), format!("{:.2}", r.df), format!("{:.4}", r.p_two_sided)),
                    None => ("-".into(), "-".into(), "insufficient data".into()),
                };
                t.push(vec![c.problem.clone(), c.metric.into(), format!("{} vs {}", c.baseline, c.other), tv, df, p]);
            }
            out.push_str(&t.render());
        }
        out
    }
}
