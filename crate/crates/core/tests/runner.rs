use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use corag_core::bench::{
    co2_model, load_dataset, run_benchmark, summarize, BenchCell, BenchSetup, DatasetFormat, Difficulty,
    EmissionConfig, McqItem, RunRecord,
};
use corag_core::corpus::{chunk_document, load_corpus, Chunk, ChunkingConfig, CorpusFormat};
use corag_core::embeddings::{cosine_similarity, EmbedError, Embedder, EmbeddingVector, HashEmbedder};
use corag_core::index::{build_index, ChunkKey, VectorIndex};
use corag_core::llm::{
    CompletionRequest, ExtractionRule, LanguageModel, LlmConfig, LlmError, LlmResponse, MockOracle, MockUniform,
};
use corag_core::prompting::PromptStyle;
use corag_core::retrieval::{
    ContextualRag, NoRag, RetrievalConfig, RetrievalContext, RetrievalStrategy, StrategyKind, VanillaRag,
};
use corag_core::synthetic;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn chunk_all(docs: &[corag_core::corpus::Document]) -> Vec<Chunk> {
    let cfg = ChunkingConfig::default();
    docs.iter().flat_map(|d| chunk_document(d, &cfg).unwrap()).collect()
}

fn small_items(n: usize) -> Vec<McqItem> {
    (0..n)
        .map(|i| McqItem {
            id: format!("q{i}"),
            question: format!("Which setting applies to case number {i}?"),
            options: vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
            correct_index: i % 4,
            difficulty: Difficulty::ALL[i % 3],
            gold_chunks: vec![],
        })
        .collect()
}

fn small_index(embedder: &dyn Embedder) -> VectorIndex {
    let chunks: Vec<Chunk> = [
        "alpha applies to low load",
        "beta is for burst traffic",
        "gamma and delta are spare",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| Chunk {
        doc_id: "notes".into(),
        seq: i as u32,
        text: t.to_string(),
        char_start: 0,
        char_end: t.len(),
    })
    .collect();
    build_index(&chunks, embedder).unwrap()
}

#[test]
fn every_cell_gets_a_record_with_modelled_co2() {
    let embedder = HashEmbedder::new(64).unwrap();
    let index = small_index(&embedder);
    let model = MockUniform::new(&LlmConfig::default());
    let cfg = RetrievalConfig::default();
    let grid = vec![
        BenchCell {
            strategy: Arc::new(VanillaRag::new(&cfg).unwrap()),
            style: PromptStyle::DirectQa,
        },
        BenchCell {
            strategy: Arc::new(ContextualRag::new(&cfg).unwrap()),
            style: PromptStyle::Cot,
        },
    ];
    let emission = EmissionConfig::default();
    let setup = BenchSetup {
        index: &index,
        embedder: &embedder,
        model: &model,
        emission,
        parallel: false,
    };
    let records = run_benchmark(&small_items(2), &grid, &setup).unwrap();
    assert_eq!(records.len(), 4);
    let order: Vec<(StrategyKind, &str)> = records.iter().map(|r| (r.strategy, r.item_id.as_str())).collect();
    assert_eq!(
        order,
        vec![
            (StrategyKind::VanillaRag, "q0"),
            (StrategyKind::VanillaRag, "q1"),
            (StrategyKind::ContextualRag, "q0"),
            (StrategyKind::ContextualRag, "q1"),
        ]
    );
    for r in &records {
        assert!(r.error.is_none());
        assert!(r.latency_s > 0.0);
        assert_eq!(r.co2_g, co2_model(r.latency_s, &emission).unwrap());
        assert_eq!(r.correct, r.chosen_index == Some(r.correct_index));
    }
    let again = run_benchmark(&small_items(2), &grid, &setup).unwrap();
    assert_eq!(records, again);
}

/// Fails any prompt that mentions case number 3.
struct FlakyModel(MockUniform);

impl LanguageModel for FlakyModel {
    fn name(&self) -> &str {
        "flaky"
    }

    fn complete(&self, request: CompletionRequest<'_>) -> Result<LlmResponse, LlmError> {
        if request.prompt.text.contains("case number 3?") {
            return Err(LlmError::Config("injected failure".into()));
        }
        self.0.complete(request)
    }
}

#[test]
fn a_failed_call_becomes_an_unanswered_record() {
    let embedder = HashEmbedder::new(64).unwrap();
    let index = small_index(&embedder);
    let model = FlakyModel(MockUniform::new(&LlmConfig::default()));
    let grid = vec![BenchCell {
        strategy: Arc::new(NoRag::new(&RetrievalConfig::default()).unwrap()),
        style: PromptStyle::DirectQa,
    }];
    let setup = BenchSetup {
        index: &index,
        embedder: &embedder,
        model: &model,
        emission: EmissionConfig::default(),
        parallel: true,
    };
    let records = run_benchmark(&small_items(6), &grid, &setup).unwrap();
    assert_eq!(records.len(), 6);
    let ids: Vec<&str> = records.iter().map(|r| r.item_id.as_str()).collect();
    assert_eq!(ids, ["q0", "q1", "q2", "q3", "q4", "q5"]);
    let failed = &records[3];
    assert_eq!(failed.chosen_index, None);
    assert_eq!(failed.extraction_rule, ExtractionRule::Unanswered);
    assert!(!failed.correct);
    assert!(failed.error.as_deref().unwrap().contains("injected failure"));
    assert!(records.iter().enumerate().all(|(i, r)| (i == 3) == r.error.is_some()));

    let report = summarize(&records).unwrap();
    let overall = report.cells.iter().find(|c| c.difficulty.is_none()).unwrap();
    assert_eq!(overall.n, 6);
    assert_eq!(overall.failed_calls, 1);
    assert_eq!(overall.unanswered, 1);
}

struct SlowEmbedder(HashEmbedder);

impl Embedder for SlowEmbedder {
    fn name(&self) -> &str {
        "slow"
    }

    fn dims(&self) -> usize {
        self.0.dims()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        thread::sleep(Duration::from_millis(20));
        self.0.embed_batch(texts)
    }
}

#[test]
fn embedding_time_does_not_change_latency() {
    let fast = HashEmbedder::new(64).unwrap();
    let slow = SlowEmbedder(HashEmbedder::new(64).unwrap());
    let index = small_index(&fast);
    let model = MockUniform::new(&LlmConfig::default());
    let grid = vec![BenchCell {
        strategy: Arc::new(ContextualRag::new(&RetrievalConfig::default()).unwrap()),
        style: PromptStyle::Cot,
    }];
    let run = |embedder: &dyn Embedder| {
        let setup = BenchSetup {
            index: &index,
            embedder,
            model: &model,
            emission: EmissionConfig::default(),
            parallel: false,
        };
        run_benchmark(&small_items(3), &grid, &setup).unwrap()
    };
    let a: Vec<f64> = run(&fast).iter().map(|r| r.latency_s).collect();
    let b: Vec<f64> = run(&slow).iter().map(|r| r.latency_s).collect();
    assert_eq!(a, b);
}

#[test]
fn committed_synthetic_fixture_matches_the_generator() {
    let set = synthetic::generate(synthetic::DEFAULT_QUESTIONS, synthetic::DEFAULT_SEED);
    let dir = fixture_dir();
    assert_eq!(
        std::fs::read_to_string(dir.join("corpus.jsonl")).unwrap(),
        set.corpus_jsonl()
    );
    assert_eq!(
        std::fs::read_to_string(dir.join("questions.jsonl")).unwrap(),
        set.questions_jsonl()
    );

    let items = load_dataset(&dir.join("questions.jsonl"), DatasetFormat::CanonicalJsonl).unwrap();
    assert_eq!(items, set.items);
    let corpus = load_corpus(&dir.join("corpus.jsonl"), CorpusFormat::Jsonl).unwrap();
    let mut docs = set.documents.clone();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    assert_eq!(corpus.documents, docs);
}

fn synthetic_records(strategy: Arc<dyn RetrievalStrategy>) -> Vec<RunRecord> {
    let dir = fixture_dir();
    let corpus = load_corpus(&dir.join("corpus.jsonl"), CorpusFormat::Jsonl).unwrap();
    let items = load_dataset(&dir.join("questions.jsonl"), DatasetFormat::CanonicalJsonl).unwrap();
    let embedder = HashEmbedder::new(1024).unwrap();
    let index = build_index(&chunk_all(&corpus.documents), &embedder).unwrap();
    let model = MockOracle::new(&LlmConfig::default());
    let grid = vec![BenchCell {
        strategy,
        style: PromptStyle::DirectQa,
    }];
    let setup = BenchSetup {
        index: &index,
        embedder: &embedder,
        model: &model,
        emission: EmissionConfig::default(),
        parallel: true,
    };
    run_benchmark(&items, &grid, &setup).unwrap()
}

#[test]
fn oracle_mock_is_always_right_with_contextual_retrieval_on_the_synthetic_set() {
    let records = synthetic_records(Arc::new(ContextualRag::new(&RetrievalConfig::default()).unwrap()));
    assert_eq!(records.len(), synthetic::DEFAULT_QUESTIONS);
    assert!(records.iter().all(|r| r.correct));
    // Every gold chunk was retrieved.
    let set = synthetic::generate(synthetic::DEFAULT_QUESTIONS, synthetic::DEFAULT_SEED);
    for (r, item) in records.iter().zip(&set.items) {
        assert!(r.retrieved_keys.contains(&item.gold_chunks[0]), "{}", item.id);
    }
}

// Forty single-document chunks: four carry one option keyword each, the rest
// share one question word among unrelated filler.
const KEYWORDS: [&str; 4] = ["zorblat", "quenvix", "moltrace", "fendrilo"];
const QUESTION: &str = "Which setting handles overload";

fn keyword_index(embedder: &dyn Embedder) -> VectorIndex {
    let mut chunks = Vec::new();
    for i in 0..40u32 {
        let text = if i % 10 == 3 {
            KEYWORDS[(i / 10) as usize].to_string()
        } else {
            let word = QUESTION.split(' ').nth(i as usize % 4).unwrap().to_lowercase();
            let filler: Vec<String> = (0..10).map(|j| format!("filler{i}x{j}")).collect();
            format!("{word} {}", filler.join(" "))
        };
        chunks.push(Chunk {
            doc_id: format!("c{i:02}"),
            seq: 0,
            text: text.clone(),
            char_start: 0,
            char_end: text.len(),
        });
    }
    build_index(&chunks, embedder).unwrap()
}

/// Brute-force top-k for each query, unioned by key with max score and the
/// first query reaching it, sorted by score then key.
fn pooling_oracle(index: &VectorIndex, queries: &[EmbeddingVector], k: usize) -> Vec<(ChunkKey, f64, usize)> {
    let mut best: BTreeMap<ChunkKey, (f64, usize)> = BTreeMap::new();
    for (qi, q) in queries.iter().enumerate() {
        let mut all: Vec<(f64, ChunkKey)> = index
            .entries()
            .iter()
            .map(|e| (cosine_similarity(q.values(), e.vector.values()).unwrap(), e.key.clone()))
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (s, key) in all.into_iter().take(k) {
            match best.get(&key) {
                Some(&(cur, _)) if cur >= s => {}
                _ => {
                    best.insert(key, (s, qi));
                }
            }
        }
    }
    let mut out: Vec<(ChunkKey, f64, usize)> = best.into_iter().map(|(k, (s, q))| (k, s, q)).collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

#[test]
fn per_option_queries_reach_keyword_chunks_the_bare_question_misses() {
    let embedder = HashEmbedder::new(1024).unwrap();
    let index = keyword_index(&embedder);
    let ctx = RetrievalContext {
        index: &index,
        embedder: &embedder,
    };
    let options: Vec<String> = KEYWORDS.iter().map(|s| s.to_string()).collect();
    let keyword_keys: BTreeSet<ChunkKey> = (0..4)
        .map(|i| ChunkKey::new(format!("c{:02}", i * 10 + 3), 0))
        .collect();

    let cfg1 = RetrievalConfig {
        k_per_query: 1,
        ..RetrievalConfig::default()
    };
    let contextual = ContextualRag::new(&cfg1).unwrap();
    let bundle = contextual.retrieve(QUESTION, &options, ctx).unwrap();
    assert_eq!(bundle.hits.len(), 4);
    assert_eq!(bundle.keys().into_iter().collect::<BTreeSet<_>>(), keyword_keys);

    let queries = embedder.embed_texts(&contextual.queries(QUESTION, &options)).unwrap();
    let expected = pooling_oracle(&index, &queries, 1);
    let got: Vec<(ChunkKey, f64, usize)> = bundle
        .provenance
        .iter()
        .map(|p| (p.chunk_key.clone(), p.best_score, p.source_query_index))
        .collect();
    assert_eq!(got, expected);

    let cfg4 = RetrievalConfig {
        k_per_query: 4,
        ..RetrievalConfig::default()
    };
    let vanilla = VanillaRag::new(&cfg4).unwrap();
    let bundle = vanilla.retrieve(QUESTION, &options, ctx).unwrap();
    assert_eq!(bundle.hits.len(), 4);
    let found: BTreeSet<ChunkKey> = bundle.keys().into_iter().collect();
    assert!(!keyword_keys.is_subset(&found));
    let queries = embedder.embed_texts(&vanilla.queries(QUESTION, &options)).unwrap();
    let expected: Vec<ChunkKey> = pooling_oracle(&index, &queries, 4).into_iter().map(|e| e.0).collect();
    assert_eq!(bundle.keys(), expected);
}
