use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{BenchError, Difficulty, McqItem};
use crate::index::ChunkKey;
use crate::retrieval::OPTION_COUNT;

/// Items per difficulty in the published ORAN-Bench-13K release
/// (easy, medium, hard).
pub const ORAN_BENCH_COUNTS: [usize; 3] = [1_139, 9_570, 3_243];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One JSON object per line: `id`, `question`, `options`, `answer`
    /// (0-based index or letter), `difficulty`, optional `gold_chunks`.
    CanonicalJsonl,
    /// ORAN-Bench-13K release files (`*_E.json`, `*_M.json`, `*_H.json`).
    OranBenchJson,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "canonical_jsonl" | "jsonl" | "canonical" => Ok(Self::CanonicalJsonl),
            "oran_bench_json" | "oran_bench" | "oran" => Ok(Self::OranBenchJson),
            other => Err(format!(
                "unknown dataset format `{other}` (expected canonical_jsonl or oran_bench_json)"
            )),
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<McqItem>, BenchError> {
    match format {
        DatasetFormat::CanonicalJsonl => load_canonical(path),
        DatasetFormat::OranBenchJson => load_oran(path),
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn invalid(location: String, id: Option<&str>, message: impl Into<String>) -> BenchError {
    BenchError::Dataset {
        location,
        id: id.map(str::to_string),
        message: message.into(),
    }
}

/// 0-based integer, or a letter A–D.
fn parse_canonical_answer(v: &Value) -> Result<usize, String> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .map(|n| n as usize)
            .filter(|&n| n < OPTION_COUNT)
            .ok_or_else(|| format!("answer {n} is out of range")),
        Value::String(s) => letter_answer(s).ok_or_else(|| format!("answer `{s}` is not a letter A-D")),
        other => Err(format!("answer must be an index or a letter, found {other}")),
    }
}

fn letter_answer(s: &str) -> Option<usize> {
    let s = s.trim().trim_end_matches([')', '.', ':']);
    match s.to_ascii_uppercase().as_str() {
        "A" => Some(0),
        "B" => Some(1),
        "C" => Some(2),
        "D" => Some(3),
        _ => None,
    }
}

fn load_canonical(path: &Path) -> Result<Vec<McqItem>, BenchError> {
    let raw = read(path)?;
    let mut items = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), i + 1);
        let v: Value = serde_json::from_str(line).map_err(|e| invalid(location.clone(), None, e.to_string()))?;
        let id = v.get("id").and_then(Value::as_str).map(str::to_string);
        let err = |m: String| invalid(location.clone(), id.as_deref(), m);
        let id_str = id.clone().ok_or_else(|| err("missing string field `id`".into()))?;
        let question = v
            .get("question")
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing string field `question`".into()))?
            .to_string();
        let options = string_list(v.get("options")).ok_or_else(|| err("`options` must be a list of strings".into()))?;
        let correct_index = parse_canonical_answer(v.get("answer").unwrap_or(&Value::Null)).map_err(&err)?;
        let difficulty = v
            .get("difficulty")
            .and_then(Value::as_str)
            .ok_or_else(|| err("missing string field `difficulty`".into()))?
            .parse::<Difficulty>()
            .map_err(&err)?;
        let gold_chunks = match v.get("gold_chunks") {
            None | Some(Value::Null) => Vec::new(),
            Some(g) => string_list(Some(g))
                .ok_or_else(|| err("`gold_chunks` must be a list of doc#seq strings".into()))?
                .iter()
                .map(|s| s.parse::<ChunkKey>())
                .collect::<Result<_, _>>()
                .map_err(&err)?,
        };
        let item = McqItem {
            id: id_str,
            question,
            options,
            correct_index,
            difficulty,
            gold_chunks,
        };
        item.validate().map_err(&err)?;
        items.push(item);
    }
    Ok(items)
}

fn string_list(v: Option<&Value>) -> Option<Vec<String>> {
    v?.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect()
}

fn option_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[1-4]|[A-Da-d])\s*[.)]\s+").unwrap())
}

/// Removes "1. " / "A) " style numbering when every option carries it.
fn strip_numbering(options: Vec<String>) -> Vec<String> {
    let re = option_prefix_re();
    if options.iter().all(|o| re.is_match(o)) {
        options.iter().map(|o| re.replace(o, "").trim().to_string()).collect()
    } else {
        options.into_iter().map(|o| o.trim().to_string()).collect()
    }
}

/// 1-based digit, letter A–D, or the full text of one option.
fn parse_oran_answer(v: &Value, options: &[String]) -> Result<usize, String> {
    let from_number = |n: u64| {
        (1..=OPTION_COUNT as u64)
            .contains(&n)
            .then(|| n as usize - 1)
            .ok_or_else(|| format!("answer {n} is out of range 1-4"))
    };
    match v {
        Value::Number(n) => from_number(n.as_u64().unwrap_or(0)),
        Value::String(s) => {
            let t = s.trim();
            let lead = t.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("");
            if let Ok(n) = lead.parse::<u64>() {
                return from_number(n);
            }
            if lead.len() == 1 {
                if let Some(i) = letter_answer(lead) {
                    return Ok(i);
                }
            }
            let stripped = option_prefix_re().replace(t, "");
            options
                .iter()
                .position(|o| o.eq_ignore_ascii_case(stripped.trim()))
                .ok_or_else(|| format!("answer `{s}` matches no option"))
        }
        other => Err(format!("unsupported answer value {other}")),
    }
}

fn difficulty_from_name(path: &Path) -> Option<Difficulty> {
    let stem = path.file_stem()?.to_string_lossy().to_ascii_lowercase();
    let tag = stem.rsplit(['_', '-']).next()?;
    tag.parse().ok()
}

fn load_oran(path: &Path) -> Result<Vec<McqItem>, BenchError> {
    if !path.is_dir() {
        return load_oran_file(path, difficulty_from_name(path));
    }
    let mut files: Vec<_> = fs::read_dir(path)
        .map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "jsonl") && difficulty_from_name(p).is_some())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(
            path.display().to_string(),
            None,
            "no *_E/_M/_H.json files in directory",
        ));
    }
    let mut items = Vec::new();
    for f in files {
        let d = difficulty_from_name(&f);
        items.extend(load_oran_file(&f, d)?);
    }
    Ok(items)
}

/// Records are either `[question, [4 options], answer]` arrays or objects
/// with `question`, `options`/`choices`, `answer` and optionally `difficulty`
/// and `id`. The file may hold one JSON array of records or one record per
/// line.
fn load_oran_file(path: &Path, file_difficulty: Option<Difficulty>) -> Result<Vec<McqItem>, BenchError> {
    let raw = read(path)?;
    let records: Vec<(String, Value)> = match serde_json::from_str::<Value>(&raw) {
        Ok(Value::Array(list)) if !list.first().is_some_and(Value::is_string) => list
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("{}#{i}", path.display()), v))
            .collect(),
        _ => {
            let mut out = Vec::new();
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let loc = format!("{}:{}", path.display(), i + 1);
                let v = serde_json::from_str(line).map_err(|e| invalid(loc.clone(), None, e.to_string()))?;
                out.push((loc, v));
            }
            out
        }
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut items = Vec::with_capacity(records.len());
    for (pos, (location, v)) in records.into_iter().enumerate() {
        let default_id = format!("{stem}-{pos}");
        let (id, question, options, answer, label) = match &v {
            Value::Array(parts) if parts.len() >= 3 => (
                default_id,
                parts[0].as_str().map(str::to_string),
                string_list(Some(&parts[1])),
                parts[2].clone(),
                None,
            ),
            Value::Object(o) => (
                o.get("id")
                    .map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string()))
                    .unwrap_or(default_id),
                o.get("question").and_then(Value::as_str).map(str::to_string),
                string_list(o.get("options").or_else(|| o.get("choices"))),
                o.get("answer")
                    .or_else(|| o.get("correct_answer"))
                    .cloned()
                    .unwrap_or(Value::Null),
                o.get("difficulty").and_then(Value::as_str).map(str::to_string),
            ),
            _ => return Err(invalid(location, None, "record is neither an array nor an object")),
        };
        let err = |m: String| invalid(location.clone(), Some(&id), m);
        let question = question.ok_or_else(|| err("missing question text".into()))?;
        let options = strip_numbering(options.ok_or_else(|| err("options must be a list of strings".into()))?);
        if options.len() != OPTION_COUNT {
            return Err(err(format!("expected {OPTION_COUNT} options, found {}", options.len())));
        }
        let correct_index = parse_oran_answer(&answer, &options).map_err(&err)?;
        let difficulty = match label {
            Some(l) => l.parse().map_err(&err)?,
            None => file_difficulty.ok_or_else(|| err("no difficulty label in record or file name".into()))?,
        };
        let item = McqItem {
            id: id.clone(),
            question: question.trim().to_string(),
            options,
            correct_index,
            difficulty,
            gold_chunks: Vec::new(),
        };
        item.validate().map_err(&err)?;
        items.push(item);
    }
    Ok(items)
}
