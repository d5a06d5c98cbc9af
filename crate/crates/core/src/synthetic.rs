//! Seeded synthetic corpus where answering needs the evidence for the right
//! option. Each question gets four option documents, each naming its option
//! and nothing from the question, plus decoy documents that repeat the
//! question wording but name no option. The bare question therefore
//! retrieves decoys, while a question + option query reaches that option's
//! document. Every third question carries a hint word shared only with its
//! gold document, so bare-question retrieval sometimes succeeds.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::json;

use crate::bench::{Difficulty, McqItem};
use crate::corpus::Document;
use crate::index::ChunkKey;
use crate::retrieval::OPTION_COUNT;
use crate::rng::SplitMix64;

pub const DEFAULT_QUESTIONS: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
const DECOYS_PER_QUESTION: usize = 2;
const HINT_EVERY: usize = 3;

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "n", "r", "l", "x", "s"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub documents: Vec<Document>,
    pub items: Vec<McqItem>,
}

/// Pseudo-words that never repeat within one generator.
struct Words {
    rng: SplitMix64,
    used: BTreeSet<String>,
}

impl Words {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[(self.rng.next_u64() % xs.len() as u64) as usize]
    }

    fn next(&mut self) -> String {
        loop {
            let syllables = 2 + (self.rng.next_u64() % 2) as usize;
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(self.pick(&ONSETS));
                w.push_str(self.pick(&VOWELS));
                w.push_str(self.pick(&CODAS));
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn phrase(&mut self, n: usize) -> String {
        (0..n).map(|_| self.next()).collect::<Vec<_>>().join(" ")
    }
}

pub fn generate(questions: usize, seed: u64) -> SyntheticSet {
    let mut words = Words {
        rng: SplitMix64::new(seed),
        used: BTreeSet::new(),
    };
    let mut documents = Vec::new();
    let mut items = Vec::new();
    for q in 0..questions {
        let id = format!("syn-{q:03}");
        let system = words.phrase(2);
        let attribute = words.phrase(2);
        let hint = (q % HINT_EVERY == 0).then(|| words.phrase(2));
        let question = match &hint {
            Some(h) => format!("Which {attribute} value does the {system} profile use under {h}?"),
            None => format!("Which {attribute} value does the {system} profile use?"),
        };
        let options: Vec<String> = (0..OPTION_COUNT).map(|_| words.phrase(2)).collect();
        let correct_index = (words.rng.next_u64() % OPTION_COUNT as u64) as usize;

        for (i, option) in options.iter().enumerate() {
            let filler = words.phrase(3);
            let mut text = format!("{option}. The entry for {option} lists {filler}.");
            if i == correct_index {
                if let Some(h) = &hint {
                    text.push_str(&format!(" It is marked {h}."));
                }
            }
            documents.push(Document {
                doc_id: format!("{id}-opt{i}"),
                title: format!("{id} option {i}"),
                text,
            });
        }
        for d in 0..DECOYS_PER_QUESTION {
            let filler = words.phrase(4);
            documents.push(Document {
                doc_id: format!("{id}-decoy{d}"),
                title: format!("{id} decoy {d}"),
                text: format!("Notes: {system}; {attribute}; {filler}."),
            });
        }
        items.push(McqItem {
            id,
            question,
            options,
            correct_index,
            difficulty: Difficulty::ALL[q % Difficulty::ALL.len()],
            gold_chunks: vec![ChunkKey::new(format!("syn-{q:03}-opt{correct_index}"), 0)],
        });
    }
    SyntheticSet { documents, items }
}

impl SyntheticSet {
    /// Corpus as `{"doc_id","title","text"}` lines.
    pub fn corpus_jsonl(&self) -> String {
        self.documents
            .iter()
            .map(|d| json!({"doc_id": d.doc_id, "title": d.title, "text": d.text}).to_string() + "\n")
            .collect()
    }

    /// Questions in the canonical dataset format, answers as letters.
    pub fn questions_jsonl(&self) -> String {
        self.items
            .iter()
            .map(|it| {
                let letter = (b'A' + it.correct_index as u8) as char;
                let gold: Vec<String> = it.gold_chunks.iter().map(ChunkKey::to_string).collect();
                json!({
                    "id": it.id,
                    "question": it.question,
                    "options": it.options,
                    "answer": letter.to_string(),
                    "difficulty": it.difficulty.as_str(),
                    "gold_chunks": gold,
                })
                .to_string()
                    + "\n"
            })
            .collect()
    }

    /// Writes `corpus.jsonl` and `questions.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("corpus.jsonl"), self.corpus_jsonl())?;
        fs::write(dir.join("questions.jsonl"), self.questions_jsonl())
    }
}
