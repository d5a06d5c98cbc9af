use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, Difficulty, EmissionConfig, MetricsReport, RunRecord};
use crate::corpus::ChunkingConfig;
use crate::embeddings::EmbedderConfig;
use crate::llm::LlmConfig;
use crate::retrieval::RetrievalConfig;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// `None` means every item was used.
    pub per_difficulty: Option<usize>,
    pub dataset: String,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
    pub emission: EmissionConfig,
    /// `strategy/style` pairs in run order.
    pub grid: Vec<String>,
    pub parallel: bool,
    /// Mock backends report modelled latencies rather than wall-clock time.
    pub latency_simulated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown report format `{other}` (expected json or markdown)")),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with object keys sorted, ending in a newline.
pub fn render_json(report: &MetricsReport) -> Result<String, BenchError> {
    let value = serde_json::to_value(report).map_err(|e| BenchError::Malformed {
        what: "report",
        message: e.to_string(),
    })?;
    let mut out = serde_json::to_string_pretty(&value).map_err(|e| BenchError::Malformed {
        what: "report",
        message: e.to_string(),
    })?;
    out.push('\n');
    Ok(out)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.prec$}"))
}

fn mean_sd(mean: Option<f64>, sd: Option<f64>, prec: usize) -> String {
    match (mean, sd) {
        (Some(m), Some(s)) => format!("{m:.prec$} ± {s:.prec$}"),
        (Some(m), None) => format!("{m:.prec$}"),
        _ => "n/a".into(),
    }
}

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn render_markdown(report: &MetricsReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Benchmark report\n");
    let _ = writeln!(md, "{} records, schema v{}.\n", report.records, report.schema_version);

    if let Some(m) = &report.manifest {
        if m.latency_simulated {
            let _ = writeln!(
                md,
                "> Latencies come from a mock backend and are simulated; they are not comparable to real inference times.\n"
            );
        } else if m.parallel {
            let _ = writeln!(
                md,
                "> Items ran concurrently; latencies include server queueing and are not comparable to sequential runs.\n"
            );
        }
    }

    let cols: Vec<Option<Difficulty>> = Difficulty::ALL
        .into_iter()
        .map(Some)
        .filter(|d| report.cells.iter().any(|c| c.difficulty == *d))
        .chain([None])
        .collect();
    let header = |first: &str| {
        let mut h = format!("| {first} |");
        for d in &cols {
            let _ = write!(h, " {} |", d.map_or("Overall".to_string(), |d| d.to_string()));
        }
        h.push('\n');
        h.push_str("|---|");
        h.push_str(&"---:|".repeat(cols.len()));
        h.push('\n');
        h
    };
    let mut rows: Vec<(String, String)> = Vec::new();
    for c in &report.cells {
        let key = format!("{} / {}", c.strategy.label(), c.style.label());
        if !rows.iter().any(|(k, _)| *k == key) {
            rows.push((key, String::new()));
        }
    }
    let table = |title: &str, cell: &dyn Fn(&super::CellMetrics) -> String| {
        let mut t = format!("## {title}\n\n");
        t.push_str(&header("Configuration"));
        for (key, _) in &rows {
            let _ = write!(t, "| {key} |");
            for d in &cols {
                let v = report
                    .cells
                    .iter()
                    .find(|c| format!("{} / {}", c.strategy.label(), c.style.label()) == *key && c.difficulty == *d)
                    .map_or_else(|| "".into(), cell);
                let _ = write!(t, " {v} |");
            }
            t.push('\n');
        }
        t.push('\n');
        t
    };

    md.push_str(&table("Accuracy (%)", &|c| {
        format!("{:.2} ({}/{})", c.accuracy * 100.0, c.correct, c.n)
    }));
    md.push_str(&table("Unanswered", &|c| c.unanswered.to_string()));
    md.push_str(&table("Latency per question (s, mean ± sd)", &|c| {
        mean_sd(c.latency_mean_s, c.latency_sd_s, 3)
    }));
    md.push_str(&table("CO₂ per question (g, mean ± sd)", &|c| {
        mean_sd(c.co2_mean_g, c.co2_sd_g, 4)
    }));

    if !report.runtime_buckets.is_empty() {
        let _ = writeln!(md, "## Runtime distribution (% of questions)\n");
        let _ = write!(md, "| Runtime |");
        for b in &report.runtime_buckets {
            let _ = write!(md, " {} (n={}) |", b.difficulty, b.n);
        }
        let _ = writeln!(md);
        let _ = writeln!(md, "|---|{}", "---:|".repeat(report.runtime_buckets.len()));
        for (i, label) in report.bucket_labels.iter().enumerate() {
            let _ = write!(md, "| {label} |");
            for b in &report.runtime_buckets {
                let _ = write!(md, " {} |", opt(b.percentages.get(i).copied(), 2));
            }
            let _ = writeln!(md);
        }
        let _ = writeln!(md);
    }

    if !report.anova.is_empty() {
        let _ = writeln!(md, "## One-way ANOVA on latency\n");
        let _ = writeln!(md, "| Factor | Scope | Groups | F | df | p |");
        let _ = writeln!(md, "|---|---|---|---:|---:|---:|");
        for a in &report.anova {
            let groups = a.groups.join(", ");
            match &a.result {
                Some(r) => {
                    let f = if r.f_statistic.is_infinite() {
                        "inf".to_string()
                    } else {
                        format!("{:.4}", r.f_statistic)
                    };
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | ({}, {}) | {} |",
                        a.factor,
                        a.scope,
                        groups,
                        f,
                        r.df_between,
                        r.df_within,
                        p_value(r.p_value)
                    );
                }
                None => {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | n/a | n/a | {} |",
                        a.factor,
                        a.scope,
                        groups,
                        a.note.as_deref().unwrap_or("n/a")
                    );
                }
            }
        }
        let _ = writeln!(md);
    }

    if let Some(m) = &report.manifest {
        let _ = writeln!(md, "## Configuration\n");
        let _ = writeln!(md, "| Key | Value |");
        let _ = writeln!(md, "|---|---|");
        let rows: Vec<(&str, String)> = vec![
            ("tool", format!("{} {}", m.tool, m.version)),
            ("dataset", m.dataset.clone()),
            ("seed", m.seed.to_string()),
            (
                "questions per difficulty",
                m.per_difficulty.map_or_else(|| "all".into(), |n| n.to_string()),
            ),
            ("grid", m.grid.join(", ")),
            ("k per query", m.retrieval.k_per_query.to_string()),
            ("max context chars", m.retrieval.max_context_chars.to_string()),
            ("bare question query", m.retrieval.include_bare_question.to_string()),
            (
                "chunking",
                format!(
                    "{} chars, {} overlap",
                    m.chunking.max_chunk_chars, m.chunking.overlap_chars
                ),
            ),
            (
                "embedder",
                format!(
                    "{} {} ({} dims) at {}",
                    m.embedder.kind, m.embedder.model_name, m.embedder.dims, m.embedder.endpoint_url
                ),
            ),
            (
                "model",
                format!("{} {} at {}", m.llm.kind, m.llm.model_name, m.llm.endpoint_url),
            ),
            ("model seed", m.llm.seed.to_string()),
            (
                "emission",
                format!(
                    "{} W, PUE {}, {} gCO₂/kWh",
                    m.emission.avg_power_w, m.emission.pue, m.emission.carbon_intensity_g_per_kwh
                ),
            ),
            ("parallel", m.parallel.to_string()),
            ("latency simulated", m.latency_simulated.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(md, "| {k} | {v} |");
        }
    }
    md
}

/// Writes the report to `path`, or stdout when `path` is `None`.
pub fn emit_report(report: &MetricsReport, format: ReportFormat, path: Option<&Path>) -> Result<(), BenchError> {
    let text = match format {
        ReportFormat::Json => render_json(report)?,
        ReportFormat::Markdown => render_markdown(report),
    };
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    manifest: RunManifest,
}

/// JSONL: an optional `{"manifest": …}` line, then one record per line.
pub fn write_records(path: &Path, manifest: Option<&RunManifest>, records: &[RunRecord]) -> Result<(), BenchError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let ser = |e: serde_json::Error| BenchError::Malformed {
        what: "record",
        message: e.to_string(),
    };
    if let Some(m) = manifest {
        let line = serde_json::to_string(&ManifestLine { manifest: m.clone() }).map_err(ser)?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    for r in records {
        let line = serde_json::to_string(r).map_err(ser)?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<(Option<RunManifest>, Vec<RunRecord>), BenchError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut manifest = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.trim_start().starts_with("{\"manifest\"") {
            let m: ManifestLine = serde_json::from_str(&line).map_err(|e| BenchError::Malformed {
                what: "records manifest",
                message: format!("{}:1: {e}", path.display()),
            })?;
            manifest = Some(m.manifest);
            continue;
        }
        let r: RunRecord = serde_json::from_str(&line).map_err(|e| BenchError::Malformed {
            what: "record",
            message: format!("{}:{}: {e}", path.display(), i + 1),
        })?;
        records.push(r);
    }
    Ok((manifest, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::summarize;
    use crate::index::ChunkKey;
    use crate::llm::ExtractionRule;
    use crate::prompting::PromptStyle;
    use crate::retrieval::StrategyKind;

    fn manifest() -> RunManifest {
        RunManifest {
            tool: "corag".into(),
            version: "0.1.0".into(),
            seed: 42,
            per_difficulty: Some(2),
            dataset: "q.jsonl".into(),
            chunking: ChunkingConfig::new(1536, 256),
            retrieval: RetrievalConfig::default(),
            embedder: EmbedderConfig::default(),
            llm: LlmConfig::default(),
            emission: EmissionConfig::default(),
            grid: vec!["contextual_rag/cot".into()],
            parallel: false,
            latency_simulated: true,
        }
    }

    fn records() -> Vec<RunRecord> {
        (0..6)
            .map(|i| RunRecord {
                item_id: format!("q{i}"),
                difficulty: Difficulty::ALL[i % 3],
                strategy: StrategyKind::ALL[i % 3],
                style: PromptStyle::Cot,
                chosen_index: Some(i % 4),
                correct_index: 0,
                extraction_rule: ExtractionRule::FinalAnswerLine,
                correct: i % 4 == 0,
                latency_s: 1.0 + i as f64,
                co2_g: 0.05 * (1.0 + i as f64),
                retrieved_keys: vec![ChunkKey::new("doc", i as u32)],
                error: None,
            })
            .collect()
    }

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        write_records(&path, Some(&manifest()), &records()).unwrap();
        let (m, r) = read_records(&path).unwrap();
        assert_eq!(m, Some(manifest()));
        assert_eq!(r, records());
    }

    #[test]
    fn json_is_stable_and_sorted() {
        let mut report = summarize(&records()).unwrap();
        report.manifest = Some(manifest());
        let a = render_json(&report).unwrap();
        let b = render_json(&report).unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"anova\"").unwrap() < a.find("\"cells\"").unwrap());
        let back: MetricsReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn markdown_has_tables_and_warning() {
        let mut report = summarize(&records()).unwrap();
        report.manifest = Some(manifest());
        let md = render_markdown(&report);
        assert!(md.contains("## Accuracy (%)"));
        assert!(md.contains("Runtime < 5 sec"));
        assert!(md.contains("simulated"));
        assert!(md.contains("| Co-RAG / CoT |"));
    }

    #[test]
    fn malformed_record_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        fs::write(&path, "{\"item_id\": 3}\n").unwrap();
        let err = read_records(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }
}
