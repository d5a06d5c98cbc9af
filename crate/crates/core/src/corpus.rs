//! Source documents and recursive, overlap-aware chunking.
//!
//! Offsets everywhere in this module are counted in Unicode scalar values
//! (`char`s), never bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 1536;
pub const DEFAULT_OVERLAP_CHARS: usize = 256;

/// Paragraph, line, sentence, word, then character fallback.
pub const DEFAULT_SEPARATORS: [&str; 5] = ["\n\n", "\n", ". ", " ", ""];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid chunking config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate doc_id `{0}`")]
    DuplicateId(String),
    #[error("no documents found under {0}")]
    NoDocuments(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub seq: u32,
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl Chunk {
    pub fn char_len(&self) -> usize {
        self.char_end - self.char_start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub max_chunk_chars: usize,
    pub overlap_chars: usize,
    pub separator_hierarchy: Vec<String>,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chunk_chars: DEFAULT_MAX_CHUNK_CHARS,
            overlap_chars: DEFAULT_OVERLAP_CHARS,
            separator_hierarchy: DEFAULT_SEPARATORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ChunkingConfig {
    pub fn new(max_chunk_chars: usize, overlap_chars: usize) -> Self {
        Self {
            max_chunk_chars,
            overlap_chars,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_chunk_chars == 0 {
            return Err(CorpusError::Config("max_chunk_chars must be positive".into()));
        }
        if self.overlap_chars >= self.max_chunk_chars {
            return Err(CorpusError::Config(format!(
                "overlap_chars ({}) must be smaller than max_chunk_chars ({})",
                self.overlap_chars, self.max_chunk_chars
            )));
        }
        match self.separator_hierarchy.last() {
            None => Err(CorpusError::Config("separator_hierarchy is empty".into())),
            Some(last) if !last.is_empty() => Err(CorpusError::Config(
                "separator_hierarchy must end with the empty (character) separator".into(),
            )),
            Some(_) => Ok(()),
        }
    }
}

/// Splits `doc` into overlapping chunks.
///
/// Each chunk is cut at the last occurrence (inside the character budget) of
/// the highest-priority separator that has one; the separator stays with the
/// chunk it terminates. The next chunk starts `overlap_chars` before the
/// previous end, moved forward onto the first separator boundary found in
/// that overlap window. Whitespace-only chunks are folded into a neighbour
/// when the neighbour has room for them.
pub fn chunk_document(doc: &Document, cfg: &ChunkingConfig) -> Result<Vec<Chunk>, CorpusError> {
    cfg.validate()?;
    if doc.text.is_empty() {
        return Err(CorpusError::EmptyInput(format!(
            "document `{}` has no text",
            doc.doc_id
        )));
    }
    let chars: Vec<char> = doc.text.chars().collect();
    let separators: Vec<Vec<char>> = cfg
        .separator_hierarchy
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.chars().collect())
        .collect();

    let ranges = split_ranges(&chars, &separators, cfg.max_chunk_chars, cfg.overlap_chars);
    let ranges = fold_whitespace_ranges(&chars, ranges, cfg.max_chunk_chars);

    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(seq, (start, end))| Chunk {
            doc_id: doc.doc_id.clone(),
            seq: seq as u32,
            text: chars[start..end].iter().collect(),
            char_start: start,
            char_end: end,
        })
        .collect())
}

fn split_ranges(chars: &[char], separators: &[Vec<char>], max: usize, overlap: usize) -> Vec<(usize, usize)> {
    let len = chars.len();
    let mut ranges = Vec::with_capacity(len / max.saturating_sub(overlap).max(1) + 1);
    let mut start = 0;
    loop {
        if len - start <= max {
            ranges.push((start, len));
            return ranges;
        }
        let window_end = start + max;
        // Cuts must leave more than `overlap` characters so the next start advances.
        let min_end = start + overlap + 1;
        let end = separators
            .iter()
            .find_map(|sep| last_boundary(chars, sep, min_end, window_end))
            .unwrap_or(window_end);
        ranges.push((start, end));

        let window_start = end - overlap;
        start = separators
            .iter()
            .find_map(|sep| first_boundary(chars, sep, window_start, end))
            .unwrap_or(window_start);
    }
}

fn is_sep_at(chars: &[char], sep: &[char], pos: usize) -> bool {
    pos + sep.len() <= chars.len() && chars[pos..pos + sep.len()] == *sep
}

/// Largest `b` in `[lo, hi]` such that a separator ends exactly at `b`.
fn last_boundary(chars: &[char], sep: &[char], lo: usize, hi: usize) -> Option<usize> {
    let n = sep.len();
    (lo.max(n)..=hi).rev().find(|&b| is_sep_at(chars, sep, b - n))
}

/// Smallest `b` in `[lo, hi)` such that a separator ends exactly at `b`.
fn first_boundary(chars: &[char], sep: &[char], lo: usize, hi: usize) -> Option<usize> {
    let n = sep.len();
    (lo.max(n)..hi).find(|&b| is_sep_at(chars, sep, b - n))
}

fn fold_whitespace_ranges(chars: &[char], mut ranges: Vec<(usize, usize)>, max: usize) -> Vec<(usize, usize)> {
    let mut i = 0;
    while i < ranges.len() {
        let (start, end) = ranges[i];
        let blank = chars[start..end].iter().all(|c| c.is_whitespace());
        if !blank || ranges.len() == 1 {
            i += 1;
            continue;
        }
        if i > 0 && end - ranges[i - 1].0 <= max {
            ranges[i - 1].1 = end;
            ranges.remove(i);
        } else if i + 1 < ranges.len() && ranges[i + 1].1 - start <= max {
            ranges[i + 1].0 = start;
            ranges.remove(i);
        } else {
            i += 1;
        }
    }
    ranges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    PlainDir,
    Jsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "plain_dir" | "dir" => Ok(Self::PlainDir),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown corpus format `{other}` (expected plain_dir or jsonl)")),
        }
    }
}

/// A record left out of a corpus load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    /// Sorted by `doc_id`.
    pub documents: Vec<Document>,
    /// Blank records; they are reported rather than failing the whole load.
    pub skipped: Vec<Skipped>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let mut loaded = match format {
        CorpusFormat::PlainDir => load_plain_dir(path)?,
        CorpusFormat::Jsonl => load_jsonl(path)?,
    };
    let mut seen = BTreeMap::new();
    for doc in &loaded.documents {
        if seen.insert(doc.doc_id.as_str(), ()).is_some() {
            return Err(CorpusError::DuplicateId(doc.doc_id.clone()));
        }
    }
    loaded.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if loaded.documents.is_empty() {
        return Err(CorpusError::NoDocuments(path.to_path_buf()));
    }
    Ok(loaded)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_plain_dir(root: &Path) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        if rel
            .components()
            .any(|c| c.as_os_str().to_string_lossy().starts_with('.'))
        {
            continue;
        }
        let doc_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let text = fs::read_to_string(entry.path()).map_err(io_err(entry.path()))?;
        if text.trim().is_empty() {
            out.skipped.push(Skipped {
                location: doc_id,
                reason: "empty input".into(),
            });
            continue;
        }
        let title = entry
            .path()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.documents.push(Document { doc_id, title, text });
    }
    Ok(out)
}

fn load_jsonl(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = LoadedCorpus::default();
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if doc.doc_id.is_empty() {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: "doc_id is empty".into(),
            });
        }
        if doc.text.trim().is_empty() {
            out.skipped.push(Skipped {
                location: format!("line {line_no} ({})", doc.doc_id),
                reason: "empty input".into(),
            });
            continue;
        }
        out.documents.push(doc);
    }
    Ok(out)
}
