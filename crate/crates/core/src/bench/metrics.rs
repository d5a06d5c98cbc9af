use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::RunManifest;
use super::stats::{mean, one_way_anova, sample_sd, AnovaResult};
use super::{BenchError, Difficulty, RunRecord};
use crate::prompting::PromptStyle;
use crate::retrieval::StrategyKind;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Runtime thresholds in seconds, upper bounds of buckets 0..=5.
const BUCKET_BOUNDS: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 50.0];

pub const BUCKET_LABELS: [&str; 7] = [
    "Runtime < 5 sec",
    "5 sec < Runtime <= 10 sec",
    "10 sec < Runtime <= 15 sec",
    "15 sec < Runtime <= 20 sec",
    "20 sec < Runtime <= 25 sec",
    "25 sec < Runtime <= 50 sec",
    "Runtime > 50 sec",
];

/// Bucket 0 is `t < 5`; bucket `i` in 1..=5 is `(bound[i-1], bound[i]]`
/// except that exactly 5 s lands in bucket 1; bucket 6 is `t > 50`.
pub fn bucket_index(latency_s: f64) -> usize {
    if latency_s < BUCKET_BOUNDS[0] {
        return 0;
    }
    BUCKET_BOUNDS[1..]
        .iter()
        .position(|&b| latency_s <= b)
        .map_or(BUCKET_BOUNDS.len(), |i| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub strategy: StrategyKind,
    pub style: PromptStyle,
    /// `None` aggregates all difficulties.
    pub difficulty: Option<Difficulty>,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub unanswered: usize,
    pub failed_calls: usize,
    pub latency_mean_s: Option<f64>,
    pub latency_sd_s: Option<f64>,
    pub co2_mean_g: Option<f64>,
    pub co2_sd_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub difficulty: Difficulty,
    pub n: usize,
    /// One entry per [`BUCKET_LABELS`] entry, in percent.
    pub percentages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaEntry {
    /// What the groups are split by: `strategy` or `difficulty`.
    pub factor: String,
    /// Human-readable scope, e.g. `cot, all difficulties`.
    pub scope: String,
    pub style: Option<PromptStyle>,
    pub difficulty: Option<Difficulty>,
    pub groups: Vec<String>,
    pub result: Option<AnovaResult>,
    /// Why `result` is absent.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub manifest: Option<RunManifest>,
    pub records: usize,
    pub cells: Vec<CellMetrics>,
    pub bucket_labels: Vec<String>,
    pub runtime_buckets: Vec<BucketRow>,
    pub anova: Vec<AnovaEntry>,
}

fn cell_metrics(
    strategy: StrategyKind,
    style: PromptStyle,
    difficulty: Option<Difficulty>,
    records: &[&RunRecord],
) -> CellMetrics {
    let n = records.len();
    let correct = records.iter().filter(|r| r.correct).count();
    let timed: Vec<&RunRecord> = records.iter().copied().filter(|r| r.has_latency()).collect();
    let lat: Vec<f64> = timed.iter().map(|r| r.latency_s).collect();
    let co2: Vec<f64> = timed.iter().map(|r| r.co2_g).collect();
    CellMetrics {
        strategy,
        style,
        difficulty,
        n,
        correct,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        unanswered: records.iter().filter(|r| r.chosen_index.is_none()).count(),
        failed_calls: n - timed.len(),
        latency_mean_s: mean(&lat),
        latency_sd_s: sample_sd(&lat),
        co2_mean_g: mean(&co2),
        co2_sd_g: sample_sd(&co2),
    }
}

fn anova_entry<K: Ord + std::fmt::Display>(
    factor: &str,
    scope: String,
    style: Option<PromptStyle>,
    difficulty: Option<Difficulty>,
    groups: BTreeMap<K, Vec<f64>>,
) -> AnovaEntry {
    let names: Vec<String> = groups.keys().map(|k| k.to_string()).collect();
    let values: Vec<Vec<f64>> = groups.into_values().collect();
    let (result, note) = match one_way_anova(&values) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    AnovaEntry {
        factor: factor.into(),
        scope,
        style,
        difficulty,
        groups: names,
        result,
        note,
    }
}

/// Aggregates records into per-cell accuracy, latency and CO₂ statistics,
/// runtime buckets per difficulty, and latency ANOVAs.
///
/// Records whose model call failed count toward `n` and as incorrect, but
/// have no latency and are left out of every latency-based statistic.
pub fn summarize(records: &[RunRecord]) -> Result<MetricsReport, BenchError> {
    if records.is_empty() {
        return Err(BenchError::NoRecords);
    }

    let mut by_cell: BTreeMap<(StrategyKind, PromptStyle), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_cell.entry((r.strategy, r.style)).or_default().push(r);
    }
    let mut cells = Vec::new();
    for (&(strategy, style), recs) in &by_cell {
        for d in Difficulty::ALL {
            let subset: Vec<&RunRecord> = recs.iter().copied().filter(|r| r.difficulty == d).collect();
            if !subset.is_empty() {
                cells.push(cell_metrics(strategy, style, Some(d), &subset));
            }
        }
        cells.push(cell_metrics(strategy, style, None, recs));
    }

    let mut runtime_buckets = Vec::new();
    for d in Difficulty::ALL {
        let lat: Vec<f64> = records
            .iter()
            .filter(|r| r.difficulty == d && r.has_latency())
            .map(|r| r.latency_s)
            .collect();
        if lat.is_empty() {
            continue;
        }
        let mut counts = [0usize; BUCKET_LABELS.len()];
        for &t in &lat {
            counts[bucket_index(t)] += 1;
        }
        runtime_buckets.push(BucketRow {
            difficulty: d,
            n: lat.len(),
            percentages: counts.iter().map(|&c| c as f64 * 100.0 / lat.len() as f64).collect(),
        });
    }

    let timed: Vec<&RunRecord> = records.iter().filter(|r| r.has_latency()).collect();
    let mut anova = Vec::new();
    let styles: Vec<PromptStyle> = PromptStyle::ALL
        .into_iter()
        .filter(|s| records.iter().any(|r| r.style == *s))
        .collect();
    for &style in &styles {
        let mut groups: BTreeMap<StrategyKind, Vec<f64>> = BTreeMap::new();
        for r in timed.iter().filter(|r| r.style == style) {
            groups.entry(r.strategy).or_default().push(r.latency_s);
        }
        anova.push(anova_entry(
            "strategy",
            format!("{style}, all difficulties"),
            Some(style),
            None,
            groups,
        ));
        for d in Difficulty::ALL {
            let mut groups: BTreeMap<StrategyKind, Vec<f64>> = BTreeMap::new();
            for r in timed.iter().filter(|r| r.style == style && r.difficulty == d) {
                groups.entry(r.strategy).or_default().push(r.latency_s);
            }
            if !groups.is_empty() {
                anova.push(anova_entry(
                    "strategy",
                    format!("{style}, {d}"),
                    Some(style),
                    Some(d),
                    groups,
                ));
            }
        }
    }
    let mut by_difficulty: BTreeMap<Difficulty, Vec<f64>> = BTreeMap::new();
    for r in &timed {
        by_difficulty.entry(r.difficulty).or_default().push(r.latency_s);
    }
    anova.push(anova_entry(
        "difficulty",
        "all strategies and prompts".into(),
        None,
        None,
        by_difficulty,
    ));

    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        manifest: None,
        records: records.len(),
        cells,
        bucket_labels: BUCKET_LABELS.iter().map(|s| s.to_string()).collect(),
        runtime_buckets,
        anova,
    })
}
