//! Embedding vectors, the cosine measure, and the embedder backends.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{join_url, HttpError, JsonClient};
use crate::rng::hash_bytes;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedder input: {0}")]
    Input(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm vector cannot be normalized or compared")]
    ZeroNorm,
    #[error("vector has a non-finite component at position {0}")]
    NonFinite(usize),
    #[error("embedding service violated its contract: {0}")]
    Contract(String),
    #[error(transparent)]
    Transport(#[from] HttpError),
}

/// A dense embedding stored as `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    pub fn check_finite(&self) -> Result<(), EmbedError> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(EmbedError::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Scales to unit L2 norm. Zero and non-finite vectors are rejected.
    pub fn normalized(&self) -> Result<Self, EmbedError> {
        self.check_finite()?;
        let norm = self.norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        Ok(Self(self.0.iter().map(|&v| (f64::from(v) / norm) as f32).collect()))
    }
}

/// `dot(a, b) / (|a| |b|)`, accumulated in `f64` in a single left-to-right
/// pass and clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    /// Registry name: `http` or `deterministic_test`.
    pub kind: String,
    pub endpoint_url: String,
    pub model_name: String,
    pub dims: usize,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// Upper bound on in-flight HTTP requests.
    pub concurrency: usize,
    /// Texts per HTTP request.
    pub batch_size: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: "deterministic_test".into(),
            endpoint_url: "http://127.0.0.1:11434".into(),
            model_name: "nomic-embed-text".into(),
            dims: 1024,
            timeout_s: 60.0,
            max_retries: 2,
            concurrency: 4,
            batch_size: 32,
        }
    }
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> usize;

    /// Backend call; inputs have already been validated.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    /// One vector per input, in input order, each of length [`Embedder::dims`].
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::Input("no texts to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(EmbedError::Input(format!("text #{i} is empty")));
        }
        let vectors = self.embed_batch(texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::Contract(format!(
                "{} vectors returned for {} texts",
                vectors.len(),
                texts.len()
            )));
        }
        for v in &vectors {
            if v.dims() != self.dims() {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dims(),
                    actual: v.dims(),
                });
            }
        }
        Ok(vectors)
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_texts(&[text.to_string()])?.remove(0))
    }
}

const HASH_SEED: u64 = 0x636f_7261_6721;

/// Offline embedder: signed feature hashing of lowercased word unigrams and
/// bigrams into `dims` buckets, then L2 normalization. Integer hashing only,
/// so vectors are identical across processes and platforms.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dims: usize,
}

impl HashEmbedder {
    pub fn new(dims: usize) -> Result<Self, EmbedError> {
        if dims == 0 {
            return Err(EmbedError::Input("dims must be positive".into()));
        }
        Ok(Self { dims })
    }

    fn embed_text(&self, text: &str) -> EmbeddingVector {
        let lowered = text.to_lowercase();
        let mut tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            tokens.push(text);
        }
        let mut counts = vec![0i64; self.dims];
        let mut add = |feature: &[u8]| {
            let h = hash_bytes(HASH_SEED, feature);
            let bucket = (h % self.dims as u64) as usize;
            counts[bucket] += if h >> 63 == 0 { 1 } else { -1 };
        };
        for t in &tokens {
            add(t.as_bytes());
        }
        for pair in tokens.windows(2) {
            add(format!("{} {}", pair[0], pair[1]).as_bytes());
        }
        let norm = counts.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        if norm == 0.0 {
            // All features cancelled; fall back to one bucket picked by the whole text.
            let mut values = vec![0.0f32; self.dims];
            values[(hash_bytes(HASH_SEED, lowered.as_bytes()) % self.dims as u64) as usize] = 1.0;
            return EmbeddingVector(values);
        }
        EmbeddingVector(counts.iter().map(|&c| (c as f64 / norm) as f32).collect())
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "deterministic_test"
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

/// Client for `POST {endpoint}/api/embed`.
pub struct HttpEmbedder {
    url: String,
    model: String,
    dims: usize,
    concurrency: usize,
    batch_size: usize,
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self, EmbedError> {
        if cfg.dims == 0 {
            return Err(EmbedError::Input("dims must be positive".into()));
        }
        if cfg.timeout_s.is_nan() || cfg.timeout_s <= 0.0 {
            return Err(EmbedError::Input("timeout_s must be positive".into()));
        }
        Ok(Self {
            url: join_url(&cfg.endpoint_url, "/api/embed"),
            model: cfg.model_name.clone(),
            dims: cfg.dims,
            concurrency: cfg.concurrency.max(1),
            batch_size: cfg.batch_size.max(1),
            client: JsonClient::new(cfg.timeout_s, cfg.max_retries),
        })
    }

    fn request(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = EmbedRequest {
            model: &self.model,
            input: texts,
        };
        let resp = self
            .client
            .post::<_, EmbedResponse>(&self.url, &body)
            .map_err(|e| match e {
                HttpError::Malformed { message, .. } | HttpError::Status { body: message, .. } => {
                    EmbedError::Contract(message)
                }
                other => EmbedError::Transport(other),
            })?;
        if resp.value.embeddings.len() != texts.len() {
            return Err(EmbedError::Contract(format!(
                "{} embeddings returned for {} inputs",
                resp.value.embeddings.len(),
                texts.len()
            )));
        }
        resp.value
            .embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.dims {
                    Err(EmbedError::Contract(format!(
                        "service returned {} dims, configured {}",
                        v.len(),
                        self.dims
                    )))
                } else {
                    Ok(EmbeddingVector(v))
                }
            })
            .collect()
    }
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> &str {
        "http"
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut out: Vec<Option<Result<Vec<EmbeddingVector>, EmbedError>>> = (0..batches.len()).map(|_| None).collect();
        for (wave_idx, wave) in batches.chunks(self.concurrency).enumerate() {
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|batch| s.spawn(move || self.request(batch))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for (i, r) in results.into_iter().enumerate() {
                out[wave_idx * self.concurrency + i] = Some(r);
            }
        }
        let mut vectors = Vec::with_capacity(texts.len());
        for r in out.into_iter().flatten() {
            vectors.extend(r?);
        }
        Ok(vectors)
    }
}

pub fn build_hash_embedder(cfg: &EmbedderConfig) -> Result<Arc<dyn Embedder>, EmbedError> {
    Ok(Arc::new(HashEmbedder::new(cfg.dims)?))
}

pub fn build_http_embedder(cfg: &EmbedderConfig) -> Result<Arc<dyn Embedder>, EmbedError> {
    Ok(Arc::new(HttpEmbedder::new(cfg)?))
}
