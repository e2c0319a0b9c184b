//! Run configuration (TOML) and backend construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Averaging, RetaLevel};
use crate::http::{HttpEmbedder, HttpLlm, HttpSettings, TracedEmbedder, TracedLlm, Tracer};
use crate::llm::{LlmClient, MockLlm};
use crate::pipeline::{Pipeline, PipelineConfig, Strategy, TokenBudget};
use crate::prompt::{CompletionLevel, PrecisionVariant, TemplateRegistry};
use crate::retrieval::{EmbeddingProvider, HashingEmbedder, DEFAULT_SLICE_TOKENS, DEFAULT_TOP_K};
use crate::serialize::SerializationFormat;
use crate::tokens::{HeuristicCounter, TokenCounter};

pub const GPT35_PROFILE: &str = "gpt35-profile";
pub const GPT4_PROFILE: &str = "gpt4-profile";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            _ => Err(format!("unknown backend {s:?} (expected mock or http)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub llm_url: String,
    /// When unset the hashing embedder is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_url: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            llm_url: "http://127.0.0.1:8080/v1/complete".into(),
            embedding_url: None,
            model: "gpt-3.5-turbo".into(),
            timeout_secs: 60,
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

impl HttpConfig {
    fn settings(&self, url: &str) -> HttpSettings {
        HttpSettings {
            timeout: Duration::from_secs(self.timeout_secs),
            attempts: self.attempts,
            backoff: Duration::from_millis(self.backoff_ms),
            ..HttpSettings::new(url)
        }
    }
}

/// Run settings; fields missing from a TOML file take their defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: String,
    pub format: SerializationFormat,
    pub top_k: usize,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_variant: Option<PrecisionVariant>,
    pub completion: CompletionLevel,
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    pub jobs: usize,
    pub levels: Vec<RetaLevel>,
    pub averaging: Averaging,
    pub profiles: BTreeMap<String, TokenBudget>,
    #[serde(default)]
    pub http: HttpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: GPT35_PROFILE.into(),
            format: SerializationFormat::Plain,
            top_k: DEFAULT_TOP_K,
            strategy: Strategy::Refine,
            precision_variant: None,
            completion: CompletionLevel::ATC,
            backend: Backend::Mock,
            trace: None,
            template_dir: None,
            jobs: 4,
            levels: RetaLevel::standard(),
            averaging: Averaging::Micro,
            profiles: BTreeMap::from([
                (GPT35_PROFILE.to_string(), TokenBudget::GPT35),
                (GPT4_PROFILE.to_string(), TokenBudget::GPT4),
            ]),
            http: HttpConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let budget = self
            .profiles
            .get(&self.profile)
            .ok_or_else(|| ConfigError::Invalid(format!("profile {:?} is not defined", self.profile)))?;
        budget
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("profile {:?}: {e}", self.profile)))?;
        if self.top_k == 0 {
            return Err(ConfigError::Invalid("top_k must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid("levels must not be empty".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> TokenBudget {
        self.profiles[&self.profile]
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            budget: self.budget(),
            format: self.format,
            top_k: self.top_k,
            strategy: self.strategy,
            precision_variant: self.precision_variant,
            jobs: self.jobs,
        }
    }

    pub fn registry(&self) -> Result<TemplateRegistry, ConfigError> {
        match &self.template_dir {
            None => Ok(TemplateRegistry::builtin()),
            Some(dir) => TemplateRegistry::with_overrides(dir).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    /// Builds the pipeline with the configured backends, wrapped for tracing
    /// when a trace path is set.
    pub fn build_pipeline(&self) -> Result<Pipeline, ConfigError> {
        self.validate()?;
        let counter: Arc<dyn TokenCounter> = Arc::new(HeuristicCounter);
        let registry = self.registry()?;
        let window = self.budget().window;
        let tracer = match &self.trace {
            None => None,
            Some(path) => Some(Arc::new(Tracer::create(path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?)),
        };
        let (client, embedder): (Arc<dyn LlmClient>, Arc<dyn EmbeddingProvider>) = match self.backend {
            Backend::Mock => {
                let llm = MockLlm::new(registry.clone(), counter.clone(), window);
                let emb = HashingEmbedder::default();
                match &tracer {
                    Some(t) => (
                        Arc::new(TracedLlm::new(llm, t.clone())),
                        Arc::new(TracedEmbedder::new(emb, t.clone())),
                    ),
                    None => (Arc::new(llm), Arc::new(emb)),
                }
            }
            Backend::Http => {
                let mut llm = HttpLlm::new(
                    self.http.settings(&self.http.llm_url),
                    self.http.model.clone(),
                    window,
                    counter.clone(),
                );
                if let Some(t) = &tracer {
                    llm = llm.with_tracer(t.clone());
                }
                let emb: Arc<dyn EmbeddingProvider> = match (&self.http.embedding_url, &tracer) {
                    (Some(url), Some(t)) => {
                        Arc::new(HttpEmbedder::new(self.http.settings(url), DEFAULT_SLICE_TOKENS).with_tracer(t.clone()))
                    }
                    (Some(url), None) => Arc::new(HttpEmbedder::new(self.http.settings(url), DEFAULT_SLICE_TOKENS)),
                    (None, Some(t)) => Arc::new(TracedEmbedder::new(HashingEmbedder::default(), t.clone())),
                    (None, None) => Arc::new(HashingEmbedder::default()),
                };
                (Arc::new(llm), emb)
            }
        };
        Pipeline::new(self.pipeline_config(), registry, client, embedder, counter)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        assert!(text.contains("[profiles.gpt35-profile]"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn customised_round_trips() {
        let cfg = RunConfig {
            profile: GPT4_PROFILE.into(),
            format: SerializationFormat::Html,
            top_k: 5,
            strategy: Strategy::MapReduce,
            precision_variant: Some(PrecisionVariant::NaiveShotPrecision),
            completion: CompletionLevel::AC,
            backend: Backend::Http,
            trace: Some("trace.jsonl".into()),
            levels: RetaLevel::fine(),
            averaging: Averaging::Macro,
            http: HttpConfig {
                embedding_url: Some("http://localhost:9/embed".into()),
                ..HttpConfig::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml("strategy = \"map_reduce\"\n[http]\nmodel = \"m\"\n").unwrap();
        assert_eq!(cfg.strategy, Strategy::MapReduce);
        assert_eq!(cfg.top_k, 3);
        assert_eq!(cfg.http.model, "m");
        assert_eq!(cfg.http.attempts, 3);
        assert!(matches!(RunConfig::from_toml("colour = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn profiles_match_budgets() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.profiles[GPT35_PROFILE], TokenBudget::GPT35);
        assert_eq!(cfg.profiles[GPT4_PROFILE].window, 32768);
    }

    #[test]
    fn invalid_configs_rejected() {
        let text = RunConfig::default().to_toml();
        let bad_profile = text.replace("profile = \"gpt35-profile\"", "profile = \"gpt5-profile\"");
        assert!(matches!(RunConfig::from_toml(&bad_profile), Err(ConfigError::Invalid(_))));
        let zero_k = text.replace("top_k = 3", "top_k = 0");
        assert!(matches!(RunConfig::from_toml(&zero_k), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_toml("profile = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn mock_pipeline_builds() {
        let p = RunConfig::default().build_pipeline().unwrap();
        assert_eq!(p.client.window(), 4096);
    }
}
