//! Runtime configuration: a TOML file, overridden by environment
//! variables, overridden by command-line flags.
//!
//! ```toml
//! graph = "graphs/productive_failure.graph"
//! corpus = "problems/pf_corpus.json"
//! trace_dir = "traces"
//! tutor_opens = false
//! max_turns = 40
//! tracer_variant = "full"
//!
//! [backend]
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! retries = 2
//!
//! [profiles.tutor]
//! model = "gpt-4o-2024-08-06"
//! temperature = 1.0
//! top_p = 1.0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatBackend, HttpBackend, HttpConfig, ReplayBackend, Role, RoleProfiles, API_KEY_ENV};
use crate::dataset::Corpus;
use crate::orchestrator::{Engine, EngineConfig, TraceStore};
use crate::strategy::StrategyGraph;
use crate::tracer::TracerVariant;

pub const ENDPOINT_ENV: &str = "STRATL_ENDPOINT";
pub const MODEL_ENV: &str = "STRATL_MODEL";
pub const TRACE_DIR_ENV: &str = "STRATL_TRACE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: HttpConfig,
    /// Model for every role; per-role profiles still win if they differ
    /// from the built-in default.
    pub model: Option<String>,
    pub profiles: RoleProfiles,
    /// Transition graph; the shipped Productive Failure graph when unset.
    pub graph: Option<PathBuf>,
    /// Problem corpus; the shipped corpus when unset.
    pub corpus: Option<PathBuf>,
    /// Where per-session trace files go; no persistence when unset.
    pub trace_dir: Option<PathBuf>,
    /// Replay fixture to use instead of the live backend.
    pub replay: Option<PathBuf>,
    pub tutor_opens: bool,
    pub continue_after_completion: bool,
    pub max_turns: Option<usize>,
    pub tracer_variant: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backend: HttpConfig::default(),
            model: None,
            profiles: RoleProfiles::default(),
            graph: None,
            corpus: None,
            trace_dir: Some(PathBuf::from("traces")),
            replay: None,
            tutor_opens: false,
            continue_after_completion: true,
            max_turns: None,
            tracer_variant: "full".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Command-line overrides; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub graph: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub retries: Option<u32>,
    pub tutor_opens: Option<bool>,
    pub max_turns: Option<usize>,
    pub tracer_variant: Option<String>,
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    /// Builds the effective configuration: file (or defaults), then the
    /// environment read through `env`, then `flags`.
    pub fn layered(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => Self::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = env(ENDPOINT_ENV) {
            config.backend.endpoint = v;
        }
        if let Some(v) = env(MODEL_ENV) {
            config.model = Some(v);
        }
        if let Some(v) = env(TRACE_DIR_ENV) {
            config.trace_dir = Some(v.into());
        }
        let f = flags.clone();
        if let Some(v) = f.endpoint {
            config.backend.endpoint = v;
        }
        if let Some(v) = f.model {
            config.model = Some(v);
        }
        config.graph = f.graph.or(config.graph);
        config.corpus = f.corpus.or(config.corpus);
        config.trace_dir = f.trace_dir.or(config.trace_dir);
        config.replay = f.replay.or(config.replay);
        if let Some(v) = f.retries {
            config.backend.retries = v;
        }
        if let Some(v) = f.tutor_opens {
            config.tutor_opens = v;
        }
        config.max_turns = f.max_turns.or(config.max_turns);
        if let Some(v) = f.tracer_variant {
            config.tracer_variant = v;
        }
        if let Some(model) = config.model.clone() {
            apply_model(&mut config.profiles, &model);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for role in Role::ALL {
            self.profiles
                .get(role)
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("profile `{role}`: {e}")))?;
        }
        self.tracer_variant().map_err(ConfigError::Invalid)?;
        if self.backend.timeout_secs.is_nan() || self.backend.timeout_secs <= 0.0 {
            return Err(ConfigError::Invalid("backend.timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn tracer_variant(&self) -> Result<TracerVariant, String> {
        self.tracer_variant.parse()
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            profiles: self.profiles.clone(),
            tracer_variant: self.tracer_variant().unwrap_or(TracerVariant::Full),
            tutor_opens: self.tutor_opens,
            continue_after_completion: self.continue_after_completion,
            max_turns: self.max_turns,
        }
    }

    pub fn load_graph(&self) -> Result<StrategyGraph, ConfigError> {
        match &self.graph {
            Some(path) => StrategyGraph::load(path)
                .map_err(|e| ConfigError::Invalid(format!("graph {}: {e}", path.display()))),
            None => Ok(StrategyGraph::productive_failure()),
        }
    }

    pub fn load_corpus(&self) -> Result<Corpus, ConfigError> {
        match &self.corpus {
            Some(path) => Corpus::load(path)
                .map_err(|e| ConfigError::Invalid(format!("corpus {}: {e}", path.display()))),
            None => Ok(Corpus::shipped()),
        }
    }

    /// The replay fixture if one is configured, otherwise the live backend,
    /// which needs the API key in the environment.
    pub fn backend(&self, api_key: Option<String>) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        if let Some(path) = &self.replay {
            let replay = ReplayBackend::load(path)
                .map_err(|e| ConfigError::Invalid(format!("replay fixture {}: {e}", path.display())))?;
            return Ok(Arc::new(replay));
        }
        let Some(key) = api_key.filter(|k| !k.is_empty()) else {
            return Err(ConfigError::Invalid(format!(
                "no replay fixture given and {API_KEY_ENV} is not set"
            )));
        };
        let http = HttpBackend::new(self.backend.clone(), Some(key))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Arc::new(http))
    }

    /// Loads graph and corpus and wires up the engine.
    pub fn build_engine(&self, backend: Arc<dyn ChatBackend>) -> Result<Engine, ConfigError> {
        let engine = Engine::new(
            backend,
            Arc::new(self.load_graph()?),
            Arc::new(self.load_corpus()?),
            self.engine_config(),
        );
        Ok(match &self.trace_dir {
            Some(dir) => engine.with_store(TraceStore::new(dir)),
            None => engine,
        })
    }
}

fn apply_model(profiles: &mut RoleProfiles, model: &str) {
    let defaults = RoleProfiles::default();
    for role in Role::ALL {
        if profiles.get(role).model == defaults.get(role).model {
            let p = match role {
                Role::Tracer => &mut profiles.tracer,
                Role::Tutor => &mut profiles.tutor,
                Role::Selector => &mut profiles.selector,
                Role::Student => &mut profiles.student,
            };
            p.model = model.to_string();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults_are_valid() {
        let c = Config::layered(None, no_env, &Overrides::default()).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.engine_config().tracer_variant, TracerVariant::Full);
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "model = \"file-model\"\ntutor_opens = true\n[backend]\nendpoint = \"http://file\"\nretries = 5\n\
             [profiles.tutor]\nmodel = \"tutor-model\"\ntemperature = 0.5\ntop_p = 1.0\n",
        )
        .unwrap();
        let env = |k: &str| match k {
            ENDPOINT_ENV => Some("http://env".to_string()),
            MODEL_ENV => Some("env-model".to_string()),
            _ => None,
        };
        let c = Config::layered(Some(&path), env, &Overrides::default()).unwrap();
        assert_eq!(c.backend.endpoint, "http://env");
        assert_eq!(c.backend.retries, 5);
        assert!(c.tutor_opens);
        assert_eq!(c.profiles.tracer.model, "env-model");
        assert_eq!(c.profiles.tutor.model, "tutor-model");
        assert_eq!(c.profiles.tutor.temperature, 0.5);

        let flags = Overrides { endpoint: Some("http://flag".into()), retries: Some(0), ..Default::default() };
        let c = Config::layered(Some(&path), env, &flags).unwrap();
        assert_eq!(c.backend.endpoint, "http://flag");
        assert_eq!(c.backend.retries, 0);
    }

    #[test]
    fn rejects_bad_values() {
        let p = Path::new("x.toml");
        assert!(matches!(Config::from_toml("unknown = 1", p), Err(ConfigError::Parse { .. })));
        let mut c = Config::default();
        c.profiles.tracer.top_p = 0.0;
        assert!(c.validate().is_err());
        let flags = Overrides { tracer_variant: Some("tiny".into()), ..Default::default() };
        assert!(Config::layered(None, no_env, &flags).is_err());
    }

    #[test]
    fn live_backend_needs_key() {
        let c = Config::default();
        assert!(c.backend(None).is_err());
        assert!(c.backend(Some("k".into())).is_ok());
    }
}
