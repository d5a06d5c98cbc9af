//! Retrieval strategies: no retrieval, question-only retrieval, and
//! choice-conditioned retrieval that pools and de-duplicates the top-k hits
//! of one query per answer option.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{EmbedError, Embedder};
use crate::index::{hit_order, ChunkKey, IndexError, RetrievalHit, VectorIndex};

pub const OPTION_COUNT: usize = 4;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_CONTEXT_CHARS: usize = 12_000;
pub const DEFAULT_QUERY_FORMAT: &str = "{question} {option}";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("expected {OPTION_COUNT} options, got {0}")]
    OptionCount(usize),
    #[error("option {0} is empty")]
    EmptyOption(usize),
    #[error("invalid retrieval config: {0}")]
    Config(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NoRag,
    VanillaRag,
    ContextualRag,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [Self::NoRag, Self::VanillaRag, Self::ContextualRag];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoRag => "no_rag",
            Self::VanillaRag => "vanilla_rag",
            Self::ContextualRag => "contextual_rag",
        }
    }

    /// Short label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::NoRag => "No RAG",
            Self::VanillaRag => "RAG",
            Self::ContextualRag => "Co-RAG",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k_per_query: usize,
    pub max_context_chars: usize,
    /// Contextual strategy only: add the bare question as a fifth query.
    pub include_bare_question: bool,
    /// Template with `{question}` and `{option}` placeholders.
    pub query_format: String,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_per_query: DEFAULT_K,
            max_context_chars: DEFAULT_MAX_CONTEXT_CHARS,
            include_bare_question: false,
            query_format: DEFAULT_QUERY_FORMAT.into(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k_per_query == 0 {
            return Err(RetrievalError::Config("k_per_query must be at least 1".into()));
        }
        if !self.query_format.contains("{option}") {
            return Err(RetrievalError::Config(
                "query_format must contain the {option} placeholder".into(),
            ));
        }
        Ok(())
    }

    /// The context budget has to fit at least one full chunk.
    pub fn validate_against_chunking(&self, max_chunk_chars: usize) -> Result<(), RetrievalError> {
        if self.max_context_chars < max_chunk_chars {
            return Err(RetrievalError::Config(format!(
                "max_context_chars ({}) is smaller than max_chunk_chars ({max_chunk_chars})",
                self.max_context_chars
            )));
        }
        Ok(())
    }

    pub fn format_query(&self, question: &str, option: &str) -> String {
        self.query_format
            .replace("{question}", question)
            .replace("{option}", option)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub chunk_key: ChunkKey,
    pub best_score: f64,
    pub source_query_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceBundle {
    pub strategy: StrategyKind,
    /// Hits that made it into `context_text`, best first.
    pub hits: Vec<RetrievalHit>,
    pub context_text: String,
    pub provenance: Vec<Provenance>,
    /// Pooled hits dropped to respect the context budget.
    pub dropped: usize,
}

impl EvidenceBundle {
    pub fn empty(strategy: StrategyKind) -> Self {
        Self {
            strategy,
            hits: Vec::new(),
            context_text: String::new(),
            provenance: Vec::new(),
            dropped: 0,
        }
    }

    pub fn keys(&self) -> Vec<ChunkKey> {
        self.hits.iter().map(|h| h.key.clone()).collect()
    }
}

/// A pooled hit and the query that produced its best score.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledHit {
    pub hit: RetrievalHit,
    pub source_query_index: usize,
}

/// Union of per-query result lists keyed by chunk, keeping each chunk's
/// maximum score (lowest query index on equal scores), ordered by score
/// descending then key ascending. The result does not depend on the order in
/// which the per-query lists were produced.
pub fn pool_hits(per_query: &[Vec<RetrievalHit>]) -> Vec<PooledHit> {
    let mut best: BTreeMap<&ChunkKey, (f64, usize, &RetrievalHit)> = BTreeMap::new();
    for (qi, hits) in per_query.iter().enumerate() {
        for h in hits {
            best.entry(&h.key)
                .and_modify(|cur| {
                    if h.score > cur.0 || (h.score == cur.0 && qi < cur.1) {
                        *cur = (h.score, qi, h);
                    }
                })
                .or_insert((h.score, qi, h));
        }
    }
    let mut pooled: Vec<PooledHit> = best
        .into_values()
        .map(|(score, qi, h)| PooledHit {
            hit: RetrievalHit {
                key: h.key.clone(),
                score,
                text: h.text.clone(),
            },
            source_query_index: qi,
        })
        .collect();
    pooled.sort_by(|a, b| hit_order(a.hit.score, &a.hit.key, b.hit.score, &b.hit.key));
    pooled
}

fn render_block(hit: &RetrievalHit) -> String {
    format!("{}\n{}", hit.key.header(), hit.text)
}

/// Concatenates hits in order as `[doc_id#seq]` + newline + text blocks
/// separated by a blank line, dropping the lowest-ranked whole blocks until
/// the result fits in `max_chars` characters.
pub fn assemble_context(strategy: StrategyKind, pooled: Vec<PooledHit>, max_chars: usize) -> EvidenceBundle {
    let blocks: Vec<String> = pooled.iter().map(|p| render_block(&p.hit)).collect();
    let lens: Vec<usize> = blocks.iter().map(|b| b.chars().count()).collect();
    let mut keep = pooled.len();
    let total = |n: usize| lens[..n].iter().sum::<usize>() + 2 * n.saturating_sub(1);
    while keep > 0 && total(keep) > max_chars {
        keep -= 1;
    }
    let dropped = pooled.len() - keep;
    let context_text = blocks[..keep].join("\n\n");
    let mut hits = Vec::with_capacity(keep);
    let mut provenance = Vec::with_capacity(keep);
    for p in pooled.into_iter().take(keep) {
        provenance.push(Provenance {
            chunk_key: p.hit.key.clone(),
            best_score: p.hit.score,
            source_query_index: p.source_query_index,
        });
        hits.push(p.hit);
    }
    EvidenceBundle {
        strategy,
        hits,
        context_text,
        provenance,
        dropped,
    }
}

pub fn check_options(options: &[String]) -> Result<(), RetrievalError> {
    if options.len() != OPTION_COUNT {
        return Err(RetrievalError::OptionCount(options.len()));
    }
    if let Some(i) = options.iter().position(|o| o.trim().is_empty()) {
        return Err(RetrievalError::EmptyOption(i));
    }
    Ok(())
}

/// Shared inputs for a retrieval call.
#[derive(Clone, Copy)]
pub struct RetrievalContext<'a> {
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
}

pub trait RetrievalStrategy: Send + Sync {
    fn kind(&self) -> StrategyKind;

    fn config(&self) -> &RetrievalConfig;

    /// Retrieval queries for one question, in query-index order.
    fn queries(&self, question: &str, options: &[String]) -> Vec<String>;

    fn retrieve(
        &self,
        question: &str,
        options: &[String],
        ctx: RetrievalContext<'_>,
    ) -> Result<EvidenceBundle, RetrievalError> {
        check_options(options)?;
        let queries = self.queries(question, options);
        if queries.is_empty() {
            return Ok(EvidenceBundle::empty(self.kind()));
        }
        let vectors = ctx.embedder.embed_texts(&queries)?;
        let per_query = vectors
            .iter()
            .map(|v| ctx.index.search(v.values(), self.config().k_per_query))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(assemble_context(
            self.kind(),
            pool_hits(&per_query),
            self.config().max_context_chars,
        ))
    }
}

/// Answers from the model's own knowledge.
#[derive(Debug, Clone)]
pub struct NoRag {
    cfg: RetrievalConfig,
}

impl NoRag {
    pub fn new(cfg: &RetrievalConfig) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        Ok(Self { cfg: cfg.clone() })
    }
}

impl RetrievalStrategy for NoRag {
    fn kind(&self) -> StrategyKind {
        StrategyKind::NoRag
    }

    fn config(&self) -> &RetrievalConfig {
        &self.cfg
    }

    fn queries(&self, _question: &str, _options: &[String]) -> Vec<String> {
        Vec::new()
    }
}

/// Top-k for the bare question.
#[derive(Debug, Clone)]
pub struct VanillaRag {
    cfg: RetrievalConfig,
}

impl VanillaRag {
    pub fn new(cfg: &RetrievalConfig) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        Ok(Self { cfg: cfg.clone() })
    }
}

impl RetrievalStrategy for VanillaRag {
    fn kind(&self) -> StrategyKind {
        StrategyKind::VanillaRag
    }

    fn config(&self) -> &RetrievalConfig {
        &self.cfg
    }

    fn queries(&self, question: &str, _options: &[String]) -> Vec<String> {
        vec![question.to_string()]
    }
}

/// One query per option (question followed by the option), pooled.
#[derive(Debug, Clone)]
pub struct ContextualRag {
    cfg: RetrievalConfig,
}

impl ContextualRag {
    pub fn new(cfg: &RetrievalConfig) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        Ok(Self { cfg: cfg.clone() })
    }
}

impl RetrievalStrategy for ContextualRag {
    fn kind(&self) -> StrategyKind {
        StrategyKind::ContextualRag
    }

    fn config(&self) -> &RetrievalConfig {
        &self.cfg
    }

    fn queries(&self, question: &str, options: &[String]) -> Vec<String> {
        let mut q: Vec<String> = options.iter().map(|o| self.cfg.format_query(question, o)).collect();
        if self.cfg.include_bare_question {
            q.push(question.to_string());
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::embeddings::HashEmbedder;
    use crate::index::build_index;

    fn opts(v: [&str; 4]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn hit(doc: &str, seq: u32, score: f64) -> RetrievalHit {
        RetrievalHit {
            key: ChunkKey::new(doc, seq),
            score,
            text: format!("{doc}{seq}"),
        }
    }

    fn small_index(e: &HashEmbedder) -> VectorIndex {
        let texts = [
            "the near rt ric hosts xapps",
            "e2 interface links ric and e2 nodes",
            "o1 interface is used for management",
            "a1 interface carries policies",
            "open fronthaul split 7.2x",
            "smo orchestrates rapps",
        ];
        let chunks: Vec<Chunk> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Chunk {
                doc_id: "doc".into(),
                seq: i as u32,
                text: t.to_string(),
                char_start: 0,
                char_end: t.len(),
            })
            .collect();
        build_index(&chunks, e).unwrap()
    }

    #[test]
    fn no_rag_is_empty() {
        let e = HashEmbedder::new(32).unwrap();
        let s = NoRag::new(&RetrievalConfig::default()).unwrap();
        let idx = VectorIndex::empty(32);
        let b = s
            .retrieve(
                "q",
                &opts(["a", "b", "c", "d"]),
                RetrievalContext {
                    index: &idx,
                    embedder: &e,
                },
            )
            .unwrap();
        assert!(b.hits.is_empty());
        assert!(b.context_text.is_empty());
    }

    #[test]
    fn wrong_option_count() {
        let e = HashEmbedder::new(32).unwrap();
        let idx = small_index(&e);
        let s = ContextualRag::new(&RetrievalConfig::default()).unwrap();
        let err = s
            .retrieve(
                "q",
                &opts(["a", "b", "c", "d"])[..3],
                RetrievalContext {
                    index: &idx,
                    embedder: &e,
                },
            )
            .unwrap_err();
        assert!(matches!(err, RetrievalError::OptionCount(3)));
    }

    #[test]
    fn identical_options_match_single_query() {
        let e = HashEmbedder::new(64).unwrap();
        let idx = small_index(&e);
        let cfg = RetrievalConfig {
            k_per_query: 3,
            ..RetrievalConfig::default()
        };
        let ctx = RetrievalContext {
            index: &idx,
            embedder: &e,
        };
        let co = ContextualRag::new(&cfg).unwrap();
        let same = opts(["E2", "E2", "E2", "E2"]);
        let b = co.retrieve("which interface links nodes", &same, ctx).unwrap();
        let direct = VanillaRag::new(&cfg)
            .unwrap()
            .retrieve("which interface links nodes E2", &same, ctx)
            .unwrap();
        assert_eq!(b.keys(), direct.keys());
        assert!(b.hits.len() <= 3);
        assert!(b.provenance.iter().all(|p| p.source_query_index == 0));
    }

    #[test]
    fn pooling_keeps_max_score_and_first_query_on_ties() {
        let pooled = pool_hits(&[
            vec![hit("a", 0, 0.5), hit("b", 0, 0.4)],
            vec![hit("b", 0, 0.9), hit("c", 0, 0.4)],
            vec![hit("a", 0, 0.5)],
        ]);
        let got: Vec<_> = pooled
            .iter()
            .map(|p| (p.hit.key.doc_id.as_str(), p.hit.score, p.source_query_index))
            .collect();
        assert_eq!(got, [("b", 0.9, 1), ("a", 0.5, 0), ("c", 0.4, 1)]);
    }

    #[test]
    fn context_format_and_budget() {
        let pooled = pool_hits(&[vec![hit("a", 0, 0.9), hit("b", 1, 0.5)]]);
        let full = assemble_context(StrategyKind::VanillaRag, pooled.clone(), 1000);
        assert_eq!(full.context_text, "[a#0]\na0\n\n[b#1]\nb1");
        assert_eq!(full.dropped, 0);
        // "[a#0]\na0" is 8 chars; adding the second block would need 18.
        let cut = assemble_context(StrategyKind::VanillaRag, pooled, 17);
        assert_eq!(cut.context_text, "[a#0]\na0");
        assert_eq!(cut.dropped, 1);
        assert_eq!(cut.hits.len(), 1);
    }

    #[test]
    fn bare_question_is_last_query() {
        let cfg = RetrievalConfig {
            include_bare_question: true,
            ..RetrievalConfig::default()
        };
        let q = ContextualRag::new(&cfg)
            .unwrap()
            .queries("Q?", &opts(["a", "b", "c", "d"]));
        assert_eq!(q, ["Q? a", "Q? b", "Q? c", "Q? d", "Q?"]);
    }

    #[test]
    fn config_validation() {
        let bad = RetrievalConfig {
            k_per_query: 0,
            ..RetrievalConfig::default()
        };
        assert!(VanillaRag::new(&bad).is_err());
        let budget = RetrievalConfig {
            max_context_chars: 1000,
            ..RetrievalConfig::default()
        };
        assert!(budget.validate_against_chunking(1536).is_err());
        assert!(RetrievalConfig::default().validate_against_chunking(1536).is_ok());
    }
}
