use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{co2_model, BenchError, Difficulty, EmissionConfig, McqItem};
use crate::embeddings::Embedder;
use crate::index::{ChunkKey, VectorIndex};
use crate::llm::{extract_answer, CompletionRequest, ExtractionRule, LanguageModel, OracleHint};
use crate::prompting::{build_prompt, PromptStyle};
use crate::retrieval::{RetrievalContext, RetrievalStrategy, StrategyKind};

/// One outcome per (item, grid cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub item_id: String,
    pub difficulty: Difficulty,
    pub strategy: StrategyKind,
    pub style: PromptStyle,
    /// `None` is UNANSWERED.
    pub chosen_index: Option<usize>,
    pub correct_index: usize,
    pub extraction_rule: ExtractionRule,
    pub correct: bool,
    /// Completion time only; retrieval is excluded.
    pub latency_s: f64,
    pub co2_g: f64,
    pub retrieved_keys: Vec<ChunkKey>,
    /// Set when retrieval or the model call failed for this item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    /// Whether the latency came from a completed model call.
    pub fn has_latency(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone)]
pub struct BenchCell {
    pub strategy: Arc<dyn RetrievalStrategy>,
    pub style: PromptStyle,
}

pub struct BenchSetup<'a> {
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
    pub model: &'a dyn LanguageModel,
    pub emission: EmissionConfig,
    /// Run items concurrently. Latencies then reflect a loaded server.
    pub parallel: bool,
}

/// Runs every cell of the grid over every item, cell by cell, returning
/// records in (cell, item) order. Per-item retrieval or model failures become
/// UNANSWERED records carrying the error; only configuration problems abort.
pub fn run_benchmark(
    items: &[McqItem],
    grid: &[BenchCell],
    setup: &BenchSetup<'_>,
) -> Result<Vec<RunRecord>, BenchError> {
    if grid.is_empty() {
        return Err(BenchError::Config("the strategy × prompt grid is empty".into()));
    }
    setup.emission.validate()?;
    for cell in grid {
        if cell.strategy.kind() != StrategyKind::NoRag {
            if setup.index.is_empty() {
                return Err(BenchError::Config(format!(
                    "strategy {} needs a non-empty index",
                    cell.strategy.kind()
                )));
            }
            if setup.index.dims() != setup.embedder.dims() {
                return Err(BenchError::Config(format!(
                    "index has {} dims but the embedder produces {}",
                    setup.index.dims(),
                    setup.embedder.dims()
                )));
            }
        }
    }
    for item in items {
        item.validate().map_err(|m| BenchError::Dataset {
            location: "input items".into(),
            id: Some(item.id.clone()),
            message: m,
        })?;
    }

    let mut records = Vec::with_capacity(items.len() * grid.len());
    for cell in grid {
        info!(
            "running {} × {} over {} items",
            cell.strategy.kind(),
            cell.style,
            items.len()
        );
        let run_one = |item: &McqItem| run_item(item, cell, setup);
        let cell_records: Vec<RunRecord> = if setup.parallel {
            items.par_iter().map(run_one).collect::<Result<_, _>>()?
        } else {
            items.iter().map(run_one).collect::<Result<_, _>>()?
        };
        records.extend(cell_records);
    }
    Ok(records)
}

fn run_item(item: &McqItem, cell: &BenchCell, setup: &BenchSetup<'_>) -> Result<RunRecord, BenchError> {
    let failed = |error: String, keys: Vec<ChunkKey>| {
        warn!("{} [{} / {}]: {error}", item.id, cell.strategy.kind(), cell.style);
        RunRecord {
            item_id: item.id.clone(),
            difficulty: item.difficulty,
            strategy: cell.strategy.kind(),
            style: cell.style,
            chosen_index: None,
            correct_index: item.correct_index,
            extraction_rule: ExtractionRule::Unanswered,
            correct: false,
            latency_s: 0.0,
            co2_g: 0.0,
            retrieved_keys: keys,
            error: Some(error),
        }
    };

    let ctx = RetrievalContext {
        index: setup.index,
        embedder: setup.embedder,
    };
    let bundle = match cell.strategy.retrieve(&item.question, &item.options, ctx) {
        Ok(b) => b,
        Err(e) => return Ok(failed(format!("retrieval failed: {e}"), Vec::new())),
    };
    let keys = bundle.keys();
    let prompt = build_prompt(cell.style, &bundle, &item.question, &item.options)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let hint = OracleHint {
        correct_index: item.correct_index,
        gold_headers: item.gold_chunks.iter().map(ChunkKey::header).collect(),
    };
    let response = match setup.model.complete(CompletionRequest {
        prompt: &prompt,
        oracle: Some(&hint),
    }) {
        Ok(r) => r,
        Err(e) => return Ok(failed(format!("completion failed: {e}"), keys)),
    };
    let answer = extract_answer(&response.text, &item.options);
    Ok(RunRecord {
        item_id: item.id.clone(),
        difficulty: item.difficulty,
        strategy: cell.strategy.kind(),
        style: cell.style,
        chosen_index: answer.choice_index,
        correct_index: item.correct_index,
        extraction_rule: answer.rule,
        correct: answer.choice_index == Some(item.correct_index),
        latency_s: response.latency_s,
        co2_g: co2_model(response.latency_s, &setup.emission)?,
        retrieved_keys: keys,
        error: None,
    })
}
