//! Benchmark harness: dataset loading, seeded sampling, the strategy ×
//! prompt grid runner, and the metrics it reports (accuracy by difficulty,
//! latency statistics, runtime-threshold buckets, one-way ANOVA and
//! per-question CO₂).

mod dataset;
mod emissions;
mod metrics;
mod report;
mod runner;
mod sample;
mod stats;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_dataset, DatasetFormat, ORAN_BENCH_COUNTS};
pub use emissions::{co2_model, EmissionConfig};
pub use metrics::{
    bucket_index, summarize, AnovaEntry, BucketRow, CellMetrics, MetricsReport, BUCKET_LABELS, REPORT_SCHEMA_VERSION,
};
pub use report::{emit_report, read_records, render_json, render_markdown, write_records, ReportFormat, RunManifest};
pub use runner::{run_benchmark, BenchCell, BenchSetup, RunRecord};
pub use sample::sample_questions;
pub use stats::{f_survival, ln_gamma, mean, one_way_anova, regularized_incomplete_beta, sample_sd, AnovaResult};

use crate::index::ChunkKey;
use crate::retrieval::OPTION_COUNT;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{location}: invalid record{}: {message}", id.as_ref().map(|i| format!(" `{i}`")).unwrap_or_default())]
    Dataset {
        location: String,
        id: Option<String>,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("difficulty `{difficulty}` has {available} items, {requested} requested")]
    InsufficientItems {
        difficulty: Difficulty,
        available: usize,
        requested: usize,
    },
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("latency must be non-negative, got {0}")]
    NegativeLatency(f64),
    #[error("ANOVA needs {0}")]
    AnovaInput(String),
    #[error("ANOVA is undefined: every observation is identical")]
    DegenerateAnova,
    #[error("no records to summarize")]
    NoRecords,
    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Self::Easy, Self::Medium, Self::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" | "e" => Ok(Self::Easy),
            "medium" | "m" | "intermediate" => Ok(Self::Medium),
            "hard" | "h" | "difficult" => Ok(Self::Hard),
            other => Err(format!("unknown difficulty label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub difficulty: Difficulty,
    /// Chunks known to contain the answer; only oracle mocks look at these.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_chunks: Vec<ChunkKey>,
}

impl McqItem {
    /// Four non-empty, pairwise distinct options and a valid answer index.
    pub fn validate(&self) -> Result<(), String> {
        if self.options.len() != OPTION_COUNT {
            return Err(format!("expected {OPTION_COUNT} options, found {}", self.options.len()));
        }
        if let Some(i) = self.options.iter().position(|o| o.trim().is_empty()) {
            return Err(format!("option {i} is empty"));
        }
        for i in 0..self.options.len() {
            for j in i + 1..self.options.len() {
                if self.options[i] == self.options[j] {
                    return Err(format!("options {i} and {j} are identical"));
                }
            }
        }
        if self.correct_index >= OPTION_COUNT {
            return Err(format!("answer index {} is out of range", self.correct_index));
        }
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        Ok(())
    }
}
