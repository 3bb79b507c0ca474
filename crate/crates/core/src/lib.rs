//! Steering an LLM tutor along an expert tutoring strategy.
//!
//! Every student message is classified into state features by an LLM
//! [tracer], the features pick the next tutoring intents through a
//! [strategy] graph, and the intents are spliced into the tutor's system
//! prompt by [steering]. The [orchestrator] runs that loop per session,
//! [service] exposes it over HTTP and [eval] measures it.

pub mod backend;
pub mod cli;
pub mod condition;
pub mod config;
pub mod dataset;
pub mod domain;
pub mod eval;
pub mod orchestrator;
pub mod service;
pub mod steering;
pub mod strategy;
pub mod template;
pub mod tracer;

pub use condition::ConditionExpr;
pub use domain::{DialogHistory, FeatureSet, Grounding, Intent, IntentSet, StateFeature, Turn};
pub use orchestrator::{Engine, EngineConfig, Session, TurnTrace, Version};
pub use strategy::StrategyGraph;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/conditions.md")]
mod book_conditions {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/strategy-graphs.md")]
mod book_strategy_graphs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/state-tracing.md")]
mod book_state_tracing {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/steering.md")]
mod book_steering {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sessions.md")]
mod book_sessions {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evaluation.md")]
mod book_evaluation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
