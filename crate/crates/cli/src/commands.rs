use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use corag_core::bench::{
    emit_report, load_dataset, read_records, render_json, render_markdown, run_benchmark, sample_questions, summarize,
    write_records, BenchCell, BenchSetup, DatasetFormat, MetricsReport, ReportFormat, RunManifest,
};
use corag_core::corpus::{chunk_document, load_corpus, Chunk, ChunkingConfig, CorpusFormat, Document, Skipped};
use corag_core::embeddings::Embedder;
use corag_core::index::{build_index, load_index, VectorIndex};
use corag_core::llm::{extract_answer, CompletionRequest, LanguageModel};
use corag_core::prompting::{build_prompt, PromptStyle};
use corag_core::registry;
use corag_core::retrieval::{RetrievalContext, RetrievalStrategy, StrategyKind};
use corag_core::synthetic;

use crate::config::Settings;
use crate::{Cli, Command, Failure, TOOL, VERSION};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let settings = Settings::resolve(&cli.settings)?;
    match &cli.command {
        Command::Ingest {
            corpus,
            out: dest,
            format,
            verify,
        } => cmd_ingest(&settings, corpus, format.as_deref(), dest, *verify, out),
        Command::Index { chunks, out: dest } => cmd_index(&settings, chunks, dest, out),
        Command::Ask {
            index,
            strategy,
            prompt,
            question,
            options,
        } => cmd_ask(&settings, index.as_deref(), strategy, prompt, question, options, out),
        Command::Bench {
            index,
            dataset,
            dataset_format,
            strategy,
            prompt,
            per_difficulty,
            parallel,
            out: dest,
        } => cmd_bench(
            &settings,
            &BenchArgs {
                index: index.clone(),
                dataset: dataset.clone(),
                dataset_format: dataset_format.clone(),
                strategies: strategy.clone(),
                prompts: prompt.clone(),
                per_difficulty: *per_difficulty,
                parallel: *parallel,
                out_dir: dest.clone(),
            },
            out,
        ),
        Command::Report {
            input,
            format,
            out: dest,
        } => cmd_report(input, format, dest.as_deref(), out),
        Command::Synth { out: dest, questions } => cmd_synth(&settings, dest, *questions, out),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display())))
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), Failure> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Failure::internal(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure::internal(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChunkManifest {
    pub tool: String,
    pub version: String,
    pub corpus: String,
    pub format: String,
    pub chunking: ChunkingConfig,
    pub documents: usize,
    pub chunks: usize,
    pub skipped: Vec<Value>,
}

/// Checks that `chunks` tile `doc`: in order, within budget, each text equal
/// to its source slice, and together covering every character.
pub fn verify_chunks(doc: &Document, chunks: &[Chunk], cfg: &ChunkingConfig) -> Result<(), String> {
    let chars: Vec<char> = doc.text.chars().collect();
    let mut covered = 0usize;
    let mut prev_start = None;
    for c in chunks {
        if c.char_start >= c.char_end || c.char_end > chars.len() {
            return Err(format!(
                "{}#{}: bad range {}..{}",
                doc.doc_id, c.seq, c.char_start, c.char_end
            ));
        }
        if prev_start.is_some_and(|p| c.char_start <= p) {
            return Err(format!("{}#{}: offsets not increasing", doc.doc_id, c.seq));
        }
        if c.char_start > covered {
            return Err(format!(
                "{}: characters {}..{} not covered",
                doc.doc_id, covered, c.char_start
            ));
        }
        if c.char_end - c.char_start > cfg.max_chunk_chars {
            return Err(format!("{}#{}: longer than {}", doc.doc_id, c.seq, cfg.max_chunk_chars));
        }
        let slice: String = chars[c.char_start..c.char_end].iter().collect();
        if slice != c.text {
            return Err(format!("{}#{}: text differs from source", doc.doc_id, c.seq));
        }
        covered = covered.max(c.char_end);
        prev_start = Some(c.char_start);
    }
    if covered != chars.len() {
        return Err(format!(
            "{}: characters {}..{} not covered",
            doc.doc_id,
            covered,
            chars.len()
        ));
    }
    Ok(())
}

pub fn cmd_ingest(
    settings: &Settings,
    corpus: &Path,
    format: Option<&str>,
    dest: &Path,
    verify: bool,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let format: CorpusFormat = match format {
        Some(f) => f.parse().map_err(Failure::input)?,
        None if corpus.is_dir() => CorpusFormat::PlainDir,
        None => CorpusFormat::Jsonl,
    };
    let loaded = load_corpus(corpus, format)?;
    let mut chunks = Vec::new();
    let mut skipped: Vec<Skipped> = loaded.skipped.clone();
    let mut verified = 0usize;
    for doc in &loaded.documents {
        match chunk_document(doc, &settings.chunking) {
            Ok(cs) => {
                if verify {
                    verify_chunks(doc, &cs, &settings.chunking)
                        .map_err(|m| Failure::internal(format!("chunk verification failed: {m}")))?;
                    verified += 1;
                }
                chunks.extend(cs);
            }
            Err(e) => skipped.push(Skipped {
                location: doc.doc_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if chunks.is_empty() {
        return Err(Failure::input(format!("{} produced no chunks", corpus.display())));
    }
    let manifest = ChunkManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        corpus: corpus.display().to_string(),
        format: match format {
            CorpusFormat::PlainDir => "plain_dir".into(),
            CorpusFormat::Jsonl => "jsonl".into(),
        },
        chunking: settings.chunking.clone(),
        documents: loaded.documents.len(),
        chunks: chunks.len(),
        skipped: skipped
            .iter()
            .map(|s| serde_json::to_value(s).map_err(|e| Failure::internal(e.to_string())))
            .collect::<Result<_, _>>()?,
    };
    let mut text = to_json(&serde_json::json!({ "manifest": manifest }))? + "\n";
    for c in &chunks {
        text.push_str(&to_json(c)?);
        text.push('\n');
    }
    write_file(dest, text.as_bytes())?;
    for s in &skipped {
        log::warn!("skipped {}: {}", s.location, s.reason);
    }
    say(
        out,
        format!(
            "{} documents, {} chunks, {} skipped -> {}",
            loaded.documents.len(),
            chunks.len(),
            skipped.len(),
            dest.display()
        ),
    )?;
    if verify {
        say(out, format!("verified coverage of {verified} documents"))?;
    }
    Ok(())
}

/// Reads a chunk file written by `ingest`, returning its manifest line.
pub fn read_chunks(path: &Path) -> Result<(Option<Value>, Vec<Chunk>), Failure> {
    let raw = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let mut manifest = None;
    let mut chunks = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(line).map_err(|e| Failure::input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if i == 0 {
            if let Some(m) = v.get("manifest") {
                manifest = Some(m.clone());
                continue;
            }
        }
        let c: Chunk =
            serde_json::from_value(v).map_err(|e| Failure::input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        chunks.push(c);
    }
    Ok((manifest, chunks))
}

fn build_embedder(settings: &Settings) -> Result<Arc<dyn Embedder>, Failure> {
    Ok(registry::embedders().build(&settings.embedder.kind, &settings.embedder)?)
}

pub fn cmd_index(settings: &Settings, chunks_path: &Path, dest: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let (ingest, chunks) = read_chunks(chunks_path)?;
    let embedder = build_embedder(settings)?;
    if let Some(m) = &ingest {
        log::info!("chunk manifest: {m}");
    }
    let index = build_index(&chunks, embedder.as_ref())?;
    write_file(dest, &index.to_bytes())?;
    say(
        out,
        format!("{} entries, {} dims -> {}", index.len(), index.dims(), dest.display()),
    )
}

fn open_index(path: Option<&Path>, needed: bool, dims: usize) -> Result<VectorIndex, Failure> {
    match path {
        Some(p) => Ok(load_index(p)?),
        None if needed => Err(Failure::input("--index is required for retrieval strategies")),
        None => Ok(VectorIndex::empty(dims)),
    }
}

fn build_strategy(settings: &Settings, name: &str) -> Result<Arc<dyn RetrievalStrategy>, Failure> {
    Ok(registry::strategies().build(name, &settings.retrieval)?)
}

fn build_model(settings: &Settings) -> Result<Arc<dyn LanguageModel>, Failure> {
    Ok(registry::models().build(&settings.llm.kind, &settings.llm)?)
}

pub fn cmd_ask(
    settings: &Settings,
    index_path: Option<&Path>,
    strategy: &str,
    prompt: &str,
    question: &str,
    options: &[String],
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let strategy = build_strategy(settings, strategy)?;
    let style: PromptStyle = prompt.parse().map_err(Failure::input)?;
    let embedder = build_embedder(settings)?;
    let model = build_model(settings)?;
    let index = open_index(index_path, strategy.kind() != StrategyKind::NoRag, embedder.dims())?;
    let ctx = RetrievalContext {
        index: &index,
        embedder: embedder.as_ref(),
    };
    let bundle = strategy.retrieve(question, options, ctx)?;
    let assembled = build_prompt(style, &bundle, question, options)?;
    let response = model.complete(CompletionRequest {
        prompt: &assembled,
        oracle: None,
    })?;
    let answer = extract_answer(&response.text, options);
    let co2 = corag_core::bench::co2_model(response.latency_s, &settings.emission)?;
    say(
        out,
        format!(
            "answer: {}",
            answer
                .letter()
                .map_or_else(|| "UNANSWERED".to_string(), |c| c.to_string())
        ),
    )?;
    say(out, format!("rule: {}", answer.rule))?;
    say(out, format!("strategy: {} / {}", strategy.kind(), style))?;
    if bundle.provenance.is_empty() {
        say(out, "retrieved: none")?;
    }
    for p in &bundle.provenance {
        say(
            out,
            format!(
                "retrieved: {} score {:.4} query {}",
                p.chunk_key, p.best_score, p.source_query_index
            ),
        )?;
    }
    if bundle.dropped > 0 {
        say(out, format!("dropped for context budget: {}", bundle.dropped))?;
    }
    let simulated = if model.simulated_latency() { " (simulated)" } else { "" };
    say(out, format!("latency_s: {:.3}{simulated}", response.latency_s))?;
    say(out, format!("co2_g: {co2:.6}"))
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub index: Option<PathBuf>,
    pub dataset: PathBuf,
    pub dataset_format: String,
    pub strategies: Vec<String>,
    pub prompts: Vec<String>,
    pub per_difficulty: Option<usize>,
    pub parallel: bool,
    pub out_dir: PathBuf,
}

pub fn cmd_bench(settings: &Settings, args: &BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let format: DatasetFormat = args.dataset_format.parse().map_err(Failure::input)?;
    let items = load_dataset(&args.dataset, format)?;
    let items = match args.per_difficulty {
        Some(n) => sample_questions(&items, n, settings.seed)?,
        None => items,
    };

    let strategy_names: Vec<String> = if args.strategies.is_empty() {
        StrategyKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
    } else {
        args.strategies.clone()
    };
    let styles: Vec<PromptStyle> = if args.prompts.is_empty() {
        PromptStyle::ALL.to_vec()
    } else {
        args.prompts
            .iter()
            .map(|p| p.parse())
            .collect::<Result<_, _>>()
            .map_err(Failure::input)?
    };
    let mut grid = Vec::new();
    for name in &strategy_names {
        let strategy = build_strategy(settings, name)?;
        for &style in &styles {
            grid.push(BenchCell {
                strategy: strategy.clone(),
                style,
            });
        }
    }

    let embedder = build_embedder(settings)?;
    let model = build_model(settings)?;
    let needs_index = grid.iter().any(|c| c.strategy.kind() != StrategyKind::NoRag);
    let index = open_index(args.index.as_deref(), needs_index, embedder.dims())?;
    info!("{} items × {} cells", items.len(), grid.len());

    let setup = BenchSetup {
        index: &index,
        embedder: embedder.as_ref(),
        model: model.as_ref(),
        emission: settings.emission,
        parallel: args.parallel,
    };
    let records = run_benchmark(&items, &grid, &setup)?;

    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed: settings.seed,
        per_difficulty: args.per_difficulty,
        dataset: args.dataset.display().to_string(),
        chunking: settings.chunking.clone(),
        retrieval: settings.retrieval.clone(),
        embedder: settings.embedder.clone(),
        llm: settings.llm.clone(),
        emission: settings.emission,
        grid: grid
            .iter()
            .map(|c| format!("{}/{}", c.strategy.kind(), c.style))
            .collect(),
        parallel: args.parallel,
        latency_simulated: model.simulated_latency(),
    };
    let mut report = summarize(&records)?;
    report.manifest = Some(manifest.clone());

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::internal(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let records_path = args.out_dir.join(RECORDS_FILE);
    write_records(&records_path, Some(&manifest), &records).map_err(|e| Failure::internal(e.to_string()))?;
    for (name, format) in [(REPORT_JSON, ReportFormat::Json), (REPORT_MD, ReportFormat::Markdown)] {
        emit_report(&report, format, Some(&args.out_dir.join(name))).map_err(|e| Failure::internal(e.to_string()))?;
    }

    for c in report.cells.iter().filter(|c| c.difficulty.is_none()) {
        say(
            out,
            format!(
                "{}/{}: accuracy {:.4} ({}/{}), unanswered {}",
                c.strategy, c.style, c.accuracy, c.correct, c.n, c.unanswered
            ),
        )?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        say(out, format!("{failed} calls failed; see {}", records_path.display()))?;
    }
    say(out, format!("wrote {}", args.out_dir.display()))
}

pub fn cmd_report(input: &Path, format: &str, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let format: ReportFormat = format.parse().map_err(Failure::input)?;
    let raw = fs::read_to_string(input).map_err(|e| Failure::input(format!("cannot read {}: {e}", input.display())))?;
    let report = match serde_json::from_str::<MetricsReport>(&raw) {
        Ok(r) => r,
        Err(_) => {
            let (manifest, records) = read_records(input)?;
            let mut r = summarize(&records)?;
            r.manifest = manifest;
            r
        }
    };
    let text = match format {
        ReportFormat::Json => render_json(&report)?,
        ReportFormat::Markdown => render_markdown(&report),
    };
    match dest {
        Some(p) => write_file(p, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::internal(format!("cannot write output: {e}"))),
    }
}

pub fn cmd_synth(settings: &Settings, dest: &Path, questions: usize, out: &mut dyn Write) -> Result<(), Failure> {
    let set = synthetic::generate(questions, settings.seed);
    set.write(dest)
        .map_err(|e| Failure::internal(format!("cannot write {}: {e}", dest.display())))?;
    say(
        out,
        format!(
            "{} documents, {} questions -> {}",
            set.documents.len(),
            set.items.len(),
            dest.display()
        ),
    )
}
