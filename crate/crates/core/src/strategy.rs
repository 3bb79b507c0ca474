//! Tutoring strategies as intent transition graphs.
//!
//! A graph has local edges (leaving a specific intent node) and global
//! edges (`"*"`, taken from any node). Each turn, every previously selected
//! intent is visited: its satisfied local edges fire, and only when none of
//! them does are the satisfied global edges followed instead. The targets of
//! all fired edges form the next intent set. Intents do not persist on their
//! own; when nothing fires the next set is empty.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::condition::{ConditionError, ConditionExpr};
use crate::domain::{FeatureSet, Intent, IntentSet};

/// The shipped Productive Failure graph document.
pub const PRODUCTIVE_FAILURE_GRAPH: &str =
    include_str!("../resources/graphs/productive_failure.graph");

pub const GLOBAL_SOURCE: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeSource {
    Global,
    Intent(Intent),
}

impl fmt::Display for EdgeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeSource::Global => f.write_str(GLOBAL_SOURCE),
            EdgeSource::Intent(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: EdgeSource,
    pub condition: ConditionExpr,
    pub target: Intent,
}

/// Serialized form of a graph, as stored in `.graph` files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub name: String,
    #[serde(default)]
    pub initial_intents: Vec<String>,
    pub edges: Vec<EdgeDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub from: String,
    pub when: String,
    pub to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    Condition(ConditionError),
    UnknownIntent(String),
    DuplicateEdge,
    Unreachable(Intent),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Position of the offending edge in the document, if any.
    pub edge: Option<usize>,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}")?;
        if let Some(i) = self.edge {
            write!(f, " (edge {i})")?;
        }
        match &self.kind {
            DiagnosticKind::Condition(e) => write!(f, ": {e}"),
            DiagnosticKind::UnknownIntent(s) => write!(f, ": unknown intent `{s}`"),
            DiagnosticKind::DuplicateEdge => write!(f, ": duplicate edge"),
            DiagnosticKind::Unreachable(i) => write!(f, ": intent {i} is unreachable"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot read graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph document: {0}")]
    Format(#[from] serde_json::Error),
    #[error("invalid graph: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// A validated transition graph.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGraph {
    pub name: String,
    pub initial_intents: IntentSet,
    edges: Vec<Edge>,
}

/// Checks a graph document. Errors make the document unloadable; warnings
/// flag intents that no turn can ever select.
pub fn validate_graph(doc: &GraphDocument) -> Vec<Diagnostic> {
    compile(doc).1
}

fn compile(doc: &GraphDocument) -> (StrategyGraph, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut initial = IntentSet::new();

    for name in &doc.initial_intents {
        match name.parse::<Intent>() {
            Ok(i) => {
                initial.insert(i);
            }
            Err(_) => diags.push(Diagnostic {
                severity: Severity::Error,
                edge: None,
                kind: DiagnosticKind::UnknownIntent(name.clone()),
            }),
        }
    }

    for (pos, e) in doc.edges.iter().enumerate() {
        let mut error = |kind| {
            diags.push(Diagnostic {
                severity: Severity::Error,
                edge: Some(pos),
                kind,
            })
        };
        let source = if e.from == GLOBAL_SOURCE {
            Some(EdgeSource::Global)
        } else {
            match e.from.parse::<Intent>() {
                Ok(i) => Some(EdgeSource::Intent(i)),
                Err(_) => {
                    error(DiagnosticKind::UnknownIntent(e.from.clone()));
                    None
                }
            }
        };
        let target = match e.to.parse::<Intent>() {
            Ok(i) => Some(i),
            Err(_) => {
                error(DiagnosticKind::UnknownIntent(e.to.clone()));
                None
            }
        };
        let condition = match ConditionExpr::parse(&e.when) {
            Ok(c) => Some(c),
            Err(err) => {
                error(DiagnosticKind::Condition(err));
                None
            }
        };
        if let (Some(source), Some(condition), Some(target)) = (source, condition, target) {
            if !seen.insert((source, condition.to_string(), target)) {
                error(DiagnosticKind::DuplicateEdge);
                continue;
            }
            edges.push(Edge {
                source,
                condition,
                target,
            });
        }
    }

    let graph = StrategyGraph {
        name: doc.name.clone(),
        initial_intents: initial,
        edges,
    };
    let reachable = graph.reachable();
    for intent in Intent::ALL {
        if !reachable.contains(&intent) {
            diags.push(Diagnostic {
                severity: Severity::Warning,
                edge: None,
                kind: DiagnosticKind::Unreachable(intent),
            });
        }
    }
    (graph, diags)
}

impl StrategyGraph {
    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        let (graph, diags) = compile(doc);
        let errors: Vec<_> = diags
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(graph)
        } else {
            Err(GraphError::Invalid(errors))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The expert-designed Productive Failure strategy.
    pub fn productive_failure() -> Self {
        Self::from_json(PRODUCTIVE_FAILURE_GRAPH).expect("shipped graph is valid")
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            name: self.name.clone(),
            initial_intents: self.initial_intents.iter().map(|i| i.id().to_string()).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDocument {
                    from: e.source.to_string(),
                    when: e.condition.to_string(),
                    to: e.target.id().to_string(),
                })
                .collect(),
        }
    }

    /// Next intent set given the previous intents and the traced features.
    pub fn select_intents(&self, prev: &IntentSet, features: &FeatureSet) -> IntentSet {
        let mut next = IntentSet::new();
        if prev.is_empty() {
            self.fire_globals(features, &mut next);
            return next;
        }
        for &node in prev {
            let mut fired = false;
            for edge in self.local_edges(node) {
                if edge.condition.eval(features) {
                    next.insert(edge.target);
                    fired = true;
                }
            }
            if !fired {
                self.fire_globals(features, &mut next);
            }
        }
        next
    }

    fn fire_globals(&self, features: &FeatureSet, into: &mut IntentSet) {
        for edge in self.edges.iter().filter(|e| e.source == EdgeSource::Global) {
            if edge.condition.eval(features) {
                into.insert(edge.target);
            }
        }
    }

    fn local_edges(&self, node: Intent) -> impl Iterator<Item = &Edge> {
        self.edges
            .iter()
            .filter(move |e| e.source == EdgeSource::Intent(node))
    }

    /// Intents reachable from the initial set or any global edge target.
    pub fn reachable(&self) -> BTreeSet<Intent> {
        let mut seen: BTreeSet<Intent> = self.initial_intents.clone();
        seen.extend(
            self.edges
                .iter()
                .filter(|e| e.source == EdgeSource::Global)
                .map(|e| e.target),
        );
        let mut queue: VecDeque<Intent> = seen.iter().copied().collect();
        while let Some(node) = queue.pop_front() {
            for edge in self.local_edges(node) {
                if seen.insert(edge.target) {
                    queue.push_back(edge.target);
                }
            }
        }
        seen
    }
}
