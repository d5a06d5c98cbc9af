//! Flat exact vector store over chunks, with top-k cosine search and a
//! versioned single-file binary format.
//!
//! ```text
//! header (28 bytes, little-endian)
//!   magic      8 bytes  b"CORAGIDX"
//!   version    u32      1
//!   dims       u32
//!   count      u64
//!   checksum   u32      CRC-32 of every byte after the header
//! entry × count
//!   doc_id     u32 length + UTF-8 bytes
//!   seq        u32
//!   text       u32 length + UTF-8 bytes
//!   vector     dims × f32
//! ```

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;
use crate::embeddings::{cosine_similarity, EmbedError, Embedder, EmbeddingVector};

pub const MAGIC: [u8; 8] = *b"CORAGIDX";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate chunk key {0}")]
    DuplicateKey(ChunkKey),
    #[error("cannot build an index from zero chunks")]
    NoChunks,
    #[error("index is empty")]
    Empty,
    #[error("query has {actual} dims, index has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("entry {key} is invalid: {source}")]
    BadVector {
        key: ChunkKey,
        #[source]
        source: EmbedError,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported index version {found} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("index file truncated: expected at least {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("index checksum mismatch: header says {stored:#010x}, payload hashes to {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// `(doc_id, seq)`; ordered by `doc_id` then `seq`. Serialized as `doc_id#seq`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChunkKey {
    pub doc_id: String,
    pub seq: u32,
}

impl ChunkKey {
    pub fn new(doc_id: impl Into<String>, seq: u32) -> Self {
        Self {
            doc_id: doc_id.into(),
            seq,
        }
    }

    /// The provenance header used in prompts, e.g. `[ts-104.txt#3]`.
    pub fn header(&self) -> String {
        format!("[{}#{}]", self.doc_id, self.seq)
    }
}

impl fmt::Display for ChunkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.seq)
    }
}

impl std::str::FromStr for ChunkKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (doc, seq) = s
            .rsplit_once('#')
            .ok_or_else(|| format!("chunk key `{s}` is not of the form doc_id#seq"))?;
        let seq = seq
            .parse()
            .map_err(|_| format!("chunk key `{s}` has a non-numeric seq"))?;
        Ok(Self::new(doc, seq))
    }
}

impl Serialize for ChunkKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChunkKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub key: ChunkKey,
    pub vector: EmbeddingVector,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub key: ChunkKey,
    pub score: f64,
    pub text: String,
}

/// Score descending, then chunk key ascending.
pub fn hit_order(a_score: f64, a_key: &ChunkKey, b_score: f64, b_key: &ChunkKey) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_key.cmp(b_key))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dims: usize,
    entries: Vec<IndexEntry>,
    version: u32,
}

impl VectorIndex {
    /// Validates and wraps already-embedded entries. Vectors are normalized.
    pub fn from_entries(dims: usize, entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(entries.len());
        for e in entries {
            if !seen.insert(e.key.clone()) {
                return Err(IndexError::DuplicateKey(e.key));
            }
            if e.vector.dims() != dims {
                return Err(IndexError::DimensionMismatch {
                    expected: dims,
                    actual: e.vector.dims(),
                });
            }
            let vector = e.vector.normalized().map_err(|source| IndexError::BadVector {
                key: e.key.clone(),
                source,
            })?;
            normalized.push(IndexEntry { vector, ..e });
        }
        Ok(Self {
            dims,
            entries: normalized,
            version: FORMAT_VERSION,
        })
    }

    pub fn empty(dims: usize) -> Self {
        Self {
            dims,
            entries: Vec::new(),
            version: FORMAT_VERSION,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact top-k by full scan. Returns `min(k, len)` hits ordered by
    /// [`hit_order`].
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.entries.is_empty() {
            return Err(IndexError::Empty);
        }
        if query.len() != self.dims {
            return Err(IndexError::DimensionMismatch {
                expected: self.dims,
                actual: query.len(),
            });
        }
        let mut scored = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            scored.push((cosine_similarity(query, e.vector.values())?, i));
        }
        let cmp =
            |a: &(f64, usize), b: &(f64, usize)| hit_order(a.0, &self.entries[a.1].key, b.0, &self.entries[b.1].key);
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, i)| RetrievalHit {
                key: self.entries[i].key.clone(),
                score,
                text: self.entries[i].text.clone(),
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        for e in &self.entries {
            put_str(&mut payload, &e.key.doc_id);
            payload.extend_from_slice(&e.key.seq.to_le_bytes());
            put_str(&mut payload, &e.text);
            for v in e.vector.values() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    /// Parses a complete file image. Never returns a partial index.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        let mut r = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::UnsupportedVersion { found: version });
        }
        let dims = r.u32()? as usize;
        let count = r.u64()?;
        let stored = r.u32()?;
        if dims == 0 {
            return Err(IndexError::Corrupt("dims is zero".into()));
        }

        let mut entries = Vec::new();
        for _ in 0..count {
            let doc_id = r.string()?;
            let seq = r.u32()?;
            let text = r.string()?;
            let raw = r.take(dims * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            entries.push(IndexEntry {
                key: ChunkKey::new(doc_id, seq),
                vector: EmbeddingVector::new(values),
                text,
            });
        }
        if r.pos != bytes.len() {
            return Err(IndexError::Corrupt(format!(
                "{} trailing bytes after the last entry",
                bytes.len() - r.pos
            )));
        }
        let computed = crc32fast::hash(&bytes[HEADER_LEN..]);
        if computed != stored {
            return Err(IndexError::ChecksumMismatch { stored, computed });
        }

        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(&e.key) {
                return Err(IndexError::DuplicateKey(e.key.clone()));
            }
            e.vector.check_finite().map_err(|source| IndexError::BadVector {
                key: e.key.clone(),
                source,
            })?;
        }
        Ok(Self { dims, entries, version })
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::Truncated {
            expected: usize::MAX,
            actual: self.bytes.len(),
        })?;
        if end > self.bytes.len() {
            return Err(IndexError::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec())
            .map_err(|e| IndexError::Corrupt(format!("invalid UTF-8 at byte {}: {e}", self.pos - n)))
    }
}

/// Embeds every chunk and builds a normalized index.
pub fn build_index(chunks: &[Chunk], embedder: &dyn Embedder) -> Result<VectorIndex, IndexError> {
    if chunks.is_empty() {
        return Err(IndexError::NoChunks);
    }
    let mut seen = BTreeSet::new();
    for c in chunks {
        let key = ChunkKey::new(c.doc_id.clone(), c.seq);
        if !seen.insert(key.clone()) {
            return Err(IndexError::DuplicateKey(key));
        }
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embedder.embed_texts(&texts)?;
    let entries = chunks
        .iter()
        .zip(vectors)
        .map(|(c, vector)| IndexEntry {
            key: ChunkKey::new(c.doc_id.clone(), c.seq),
            vector,
            text: c.text.clone(),
        })
        .collect();
    VectorIndex::from_entries(embedder.dims(), entries)
}

pub fn save_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    fs::write(path, index.to_bytes()).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    let bytes = fs::read(path).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    VectorIndex::from_bytes(&bytes)
}
