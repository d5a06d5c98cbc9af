//! Effective settings: defaults, then the config file, then environment,
//! then flags. Environment variables reach us through clap's `env` support,
//! which already ranks them under explicit flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use corag_core::bench::EmissionConfig;
use corag_core::corpus::ChunkingConfig;
use corag_core::embeddings::EmbedderConfig;
use corag_core::llm::LlmConfig;
use corag_core::retrieval::RetrievalConfig;

use crate::Failure;

pub const DEFAULT_SEED: u64 = 42;

/// Key-value config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub chunk_size: Option<usize>,
    pub overlap: Option<usize>,
    pub k: Option<usize>,
    pub max_context_chars: Option<usize>,
    pub include_bare_question: Option<bool>,
    pub query_format: Option<String>,
    pub embedder: Option<String>,
    pub embed_url: Option<String>,
    pub embed_model: Option<String>,
    pub dims: Option<usize>,
    pub embed_batch_size: Option<usize>,
    pub embed_concurrency: Option<usize>,
    pub llm: Option<String>,
    pub llm_url: Option<String>,
    pub llm_model: Option<String>,
    pub llm_timeout_s: Option<f64>,
    pub max_retries: Option<u32>,
    pub power_w: Option<f64>,
    pub pue: Option<f64>,
    pub carbon_intensity: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let raw = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&raw).map_err(|e| Failure::input(format!("bad config {}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// Key-value (TOML) config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum chunk length in characters
    #[arg(long, global = true)]
    pub chunk_size: Option<usize>,
    #[arg(long, global = true)]
    pub overlap: Option<usize>,
    /// Hits kept per retrieval query
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub max_context_chars: Option<usize>,
    /// Add the bare question as an extra contextual query
    #[arg(long, global = true)]
    pub bare_question: bool,
    /// Embedder backend: deterministic_test or http
    #[arg(long, global = true)]
    pub embedder: Option<String>,
    #[arg(long, global = true, env = "ENGINE_EMBED_URL")]
    pub embed_url: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    #[arg(long, global = true)]
    pub dims: Option<usize>,
    /// Model backend: http, mock_oracle or mock_uniform
    #[arg(long, global = true)]
    pub llm: Option<String>,
    #[arg(long, global = true, env = "ENGINE_LLM_URL")]
    pub llm_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    #[arg(long, global = true)]
    pub power_w: Option<f64>,
    #[arg(long, global = true)]
    pub pue: Option<f64>,
    /// Grid carbon intensity in gCO2/kWh
    #[arg(long, global = true)]
    pub carbon_intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
    pub emission: EmissionConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            chunking: ChunkingConfig::default(),
            retrieval: RetrievalConfig::default(),
            embedder: EmbedderConfig::default(),
            llm: LlmConfig {
                seed: DEFAULT_SEED,
                ..LlmConfig::default()
            },
            emission: EmissionConfig::default(),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Settings {
    pub fn resolve(args: &SettingsArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut s = Self::default();
        s.apply_file(file);
        s.apply_args(args);
        s.llm.seed = s.seed;
        s.validate()?;
        Ok(s)
    }

    fn apply_file(&mut self, f: FileConfig) {
        set(&mut self.seed, f.seed);
        set(&mut self.chunking.max_chunk_chars, f.chunk_size);
        set(&mut self.chunking.overlap_chars, f.overlap);
        set(&mut self.retrieval.k_per_query, f.k);
        set(&mut self.retrieval.max_context_chars, f.max_context_chars);
        set(&mut self.retrieval.include_bare_question, f.include_bare_question);
        set(&mut self.retrieval.query_format, f.query_format);
        set(&mut self.embedder.kind, f.embedder);
        set(&mut self.embedder.endpoint_url, f.embed_url);
        set(&mut self.embedder.model_name, f.embed_model);
        set(&mut self.embedder.dims, f.dims);
        set(&mut self.embedder.batch_size, f.embed_batch_size);
        set(&mut self.embedder.concurrency, f.embed_concurrency);
        set(&mut self.llm.kind, f.llm);
        set(&mut self.llm.endpoint_url, f.llm_url);
        set(&mut self.llm.model_name, f.llm_model);
        set(&mut self.llm.timeout_s, f.llm_timeout_s);
        if let Some(r) = f.max_retries {
            self.llm.max_retries = r;
            self.embedder.max_retries = r;
        }
        set(&mut self.emission.avg_power_w, f.power_w);
        set(&mut self.emission.pue, f.pue);
        set(&mut self.emission.carbon_intensity_g_per_kwh, f.carbon_intensity);
    }

    fn apply_args(&mut self, a: &SettingsArgs) {
        set(&mut self.seed, a.seed);
        set(&mut self.chunking.max_chunk_chars, a.chunk_size);
        set(&mut self.chunking.overlap_chars, a.overlap);
        set(&mut self.retrieval.k_per_query, a.k);
        set(&mut self.retrieval.max_context_chars, a.max_context_chars);
        if a.bare_question {
            self.retrieval.include_bare_question = true;
        }
        set(&mut self.embedder.kind, a.embedder.clone());
        set(&mut self.embedder.endpoint_url, a.embed_url.clone());
        set(&mut self.embedder.model_name, a.embed_model.clone());
        set(&mut self.embedder.dims, a.dims);
        set(&mut self.llm.kind, a.llm.clone());
        set(&mut self.llm.endpoint_url, a.llm_url.clone());
        set(&mut self.llm.model_name, a.llm_model.clone());
        set(&mut self.emission.avg_power_w, a.power_w);
        set(&mut self.emission.pue, a.pue);
        set(&mut self.emission.carbon_intensity_g_per_kwh, a.carbon_intensity);
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.chunking.validate().map_err(|e| Failure::input(e.to_string()))?;
        self.retrieval.validate().map_err(|e| Failure::input(e.to_string()))?;
        self.retrieval
            .validate_against_chunking(self.chunking.max_chunk_chars)
            .map_err(|e| Failure::input(e.to_string()))?;
        self.emission.validate().map_err(|e| Failure::input(e.to_string()))?;
        if self.embedder.dims == 0 {
            return Err(Failure::input("dims must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "k = 7\nseed = 3\npower_w = 200.0\nllm = \"mock_oracle\"\n").unwrap();
        let args = SettingsArgs {
            config: Some(path),
            k: Some(9),
            ..SettingsArgs::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!(s.retrieval.k_per_query, 9);
        assert_eq!(s.seed, 3);
        assert_eq!(s.llm.seed, 3);
        assert_eq!(s.emission.avg_power_w, 200.0);
        assert_eq!(s.llm.kind, "mock_oracle");
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "kk = 1\n").unwrap();
        let args = SettingsArgs {
            config: Some(path),
            ..SettingsArgs::default()
        };
        let err = Settings::resolve(&args).unwrap_err();
        assert_eq!(err.code, crate::ExitCode::Input);
    }

    #[test]
    fn invalid_overlap_is_input_error() {
        let args = SettingsArgs {
            chunk_size: Some(100),
            overlap: Some(100),
            ..SettingsArgs::default()
        };
        assert_eq!(Settings::resolve(&args).unwrap_err().code, crate::ExitCode::Input);
    }
}
