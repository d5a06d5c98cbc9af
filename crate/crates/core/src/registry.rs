//! Name → factory tables for the pluggable pieces: retrieval strategies,
//! embedders and language models. Names are matched case-insensitively with
//! `-` and `_` treated alike.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::embeddings::{self, Embedder, EmbedderConfig};
use crate::llm::{self, LanguageModel, LlmConfig};
use crate::retrieval::{self, RetrievalConfig, RetrievalStrategy};
use crate::Error;

#[derive(Debug, Error)]
#[error("unknown {what} `{name}` (available: {})", available.join(", "))]
pub struct UnknownName {
    pub what: &'static str,
    pub name: String,
    pub available: Vec<String>,
}

pub type Factory<C, T> = fn(&C) -> Result<Arc<T>, Error>;

pub struct Registry<C, T: ?Sized> {
    what: &'static str,
    factories: BTreeMap<String, Factory<C, T>>,
    aliases: BTreeMap<String, String>,
}

fn normalize(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}

impl<C, T: ?Sized> Registry<C, T> {
    pub fn new(what: &'static str) -> Self {
        Self {
            what,
            factories: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: Factory<C, T>) -> &mut Self {
        self.factories.insert(normalize(name), factory);
        self
    }

    pub fn alias(&mut self, alias: &str, target: &str) -> &mut Self {
        self.aliases.insert(normalize(alias), normalize(target));
        self
    }

    /// Canonical names, sorted.
    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    /// Resolves an alias or canonical name to the canonical name.
    pub fn resolve(&self, name: &str) -> Result<String, UnknownName> {
        let n = normalize(name);
        let n = self.aliases.get(&n).cloned().unwrap_or(n);
        if self.factories.contains_key(&n) {
            Ok(n)
        } else {
            Err(UnknownName {
                what: self.what,
                name: name.to_string(),
                available: self.names(),
            })
        }
    }

    pub fn build(&self, name: &str, cfg: &C) -> Result<Arc<T>, Error> {
        let canonical = self.resolve(name)?;
        (self.factories[&canonical])(cfg)
    }
}

pub type StrategyRegistry = Registry<RetrievalConfig, dyn RetrievalStrategy>;
pub type EmbedderRegistry = Registry<EmbedderConfig, dyn Embedder>;
pub type ModelRegistry = Registry<LlmConfig, dyn LanguageModel>;

/// `no_rag` (`none`), `vanilla_rag` (`rag`), `contextual_rag` (`corag`).
pub fn strategies() -> StrategyRegistry {
    let mut r = Registry::new("retrieval strategy");
    r.register("no_rag", |c| {
        Ok(Arc::new(retrieval::NoRag::new(c)?) as Arc<dyn RetrievalStrategy>)
    })
    .register("vanilla_rag", |c| {
        Ok(Arc::new(retrieval::VanillaRag::new(c)?) as Arc<dyn RetrievalStrategy>)
    })
    .register("contextual_rag", |c| {
        Ok(Arc::new(retrieval::ContextualRag::new(c)?) as Arc<dyn RetrievalStrategy>)
    })
    .alias("none", "no_rag")
    .alias("rag", "vanilla_rag")
    .alias("corag", "contextual_rag")
    .alias("co_rag", "contextual_rag");
    r
}

/// `deterministic_test` (`hash`) and `http`.
pub fn embedders() -> EmbedderRegistry {
    let mut r = Registry::new("embedder");
    r.register("deterministic_test", |c| Ok(embeddings::build_hash_embedder(c)?))
        .register("http", |c| Ok(embeddings::build_http_embedder(c)?))
        .alias("hash", "deterministic_test")
        .alias("test", "deterministic_test");
    r
}

/// `http`, `mock_oracle`, `mock_uniform`.
pub fn models() -> ModelRegistry {
    let mut r = Registry::new("language model");
    r.register("http", |c| {
        Ok(Arc::new(llm::HttpModel::new(c)?) as Arc<dyn LanguageModel>)
    })
    .register("mock_oracle", |c| {
        Ok(Arc::new(llm::MockOracle::new(c)) as Arc<dyn LanguageModel>)
    })
    .register("mock_uniform", |c| {
        Ok(Arc::new(llm::MockUniform::new(c)) as Arc<dyn LanguageModel>)
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::StrategyKind;

    #[test]
    fn aliases_resolve() {
        let r = strategies();
        assert_eq!(r.resolve("corag").unwrap(), "contextual_rag");
        assert_eq!(r.resolve("Vanilla-RAG").unwrap(), "vanilla_rag");
        let s = r.build("none", &RetrievalConfig::default()).unwrap();
        assert_eq!(s.kind(), StrategyKind::NoRag);
    }

    #[test]
    fn unknown_lists_available() {
        let err = models().resolve("gpt").unwrap_err();
        assert_eq!(err.available, ["http", "mock_oracle", "mock_uniform"]);
        assert!(err.to_string().contains("unknown language model `gpt`"));
    }

    #[test]
    fn embedder_registry_builds_hash() {
        let cfg = EmbedderConfig {
            dims: 12,
            ..EmbedderConfig::default()
        };
        let e = embedders().build("hash", &cfg).unwrap();
        assert_eq!(e.dims(), 12);
        assert_eq!(e.name(), "deterministic_test");
    }
}
