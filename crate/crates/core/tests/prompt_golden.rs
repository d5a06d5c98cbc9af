//! Prompts for a fixed index and question, compared byte for byte with the
//! files in `tests/fixtures/golden`. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::fs;
use std::path::{Path, PathBuf};

use corag_core::corpus::{chunk_document, ChunkingConfig, Document};
use corag_core::embeddings::HashEmbedder;
use corag_core::index::build_index;
use corag_core::prompting::{build_prompt, PromptStyle, COT_INSTRUCTION, DIRECT_INSTRUCTION};
use corag_core::registry;
use corag_core::retrieval::{RetrievalConfig, RetrievalContext};

const QUESTION: &str = "Which interface connects the near-RT RIC to the E2 nodes?";
const OPTIONS: [&str; 4] = ["E2", "A1", "O1", "F1"];

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn documents() -> Vec<Document> {
    [
        ("arch.txt", "The near-RT RIC hosts xApps.\n\nIt reaches E2 nodes over the E2 interface, which carries subscriptions and control messages."),
        ("mgmt.txt", "The O1 interface carries management plane traffic between the SMO and managed elements."),
        ("policy.txt", "Policies flow from the non-RT RIC to the near-RT RIC over A1."),
        ("split.txt", "F1 joins the central unit and the distributed unit inside a gNB."),
    ]
    .iter()
    .map(|(id, text)| Document {
        doc_id: id.to_string(),
        title: id.to_string(),
        text: text.to_string(),
    })
    .collect()
}

/// (file name, strategy, style)
const CASES: [(&str, &str, PromptStyle); 4] = [
    ("no_rag_direct_qa.txt", "no_rag", PromptStyle::DirectQa),
    ("vanilla_rag_cot.txt", "vanilla_rag", PromptStyle::Cot),
    ("contextual_rag_direct_qa.txt", "contextual_rag", PromptStyle::DirectQa),
    ("contextual_rag_cot.txt", "contextual_rag", PromptStyle::Cot),
];

fn render_all() -> Vec<(String, String)> {
    let embedder = HashEmbedder::new(256).unwrap();
    let cfg = ChunkingConfig::new(80, 16);
    let chunks: Vec<_> = documents()
        .iter()
        .flat_map(|d| chunk_document(d, &cfg).unwrap())
        .collect();
    let index = build_index(&chunks, &embedder).unwrap();
    let ctx = RetrievalContext {
        index: &index,
        embedder: &embedder,
    };
    let retrieval = RetrievalConfig {
        k_per_query: 2,
        ..RetrievalConfig::default()
    };
    let options: Vec<String> = OPTIONS.iter().map(|s| s.to_string()).collect();
    let strategies = registry::strategies();
    CASES
        .iter()
        .map(|(file, strategy, style)| {
            let s = strategies.build(strategy, &retrieval).unwrap();
            let bundle = s.retrieve(QUESTION, &options, ctx).unwrap();
            let prompt = build_prompt(*style, &bundle, QUESTION, &options).unwrap();
            (file.to_string(), prompt.text)
        })
        .collect()
}

#[test]
fn prompts_match_golden_files() {
    let dir = golden_dir();
    let rendered = render_all();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&dir).unwrap();
        for (file, text) in &rendered {
            fs::write(dir.join(file), text).unwrap();
        }
    }
    for (file, text) in &rendered {
        let golden = fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert_eq!(text, &golden, "{file} drifted");
    }
    assert_eq!(rendered, render_all());
}

#[test]
fn golden_files_carry_the_instruction_sentences() {
    for (file, _, style) in CASES {
        let text = fs::read_to_string(golden_dir().join(file)).unwrap();
        match style {
            PromptStyle::DirectQa => {
                assert!(text.starts_with(DIRECT_INSTRUCTION));
                assert!(text.contains("Based on the following context, answer the question."));
                assert!(text.ends_with("\nAnswer:"));
            }
            PromptStyle::Cot => {
                assert!(text.starts_with(COT_INSTRUCTION));
                assert!(text.contains("think step-by-step to determine the answer"));
            }
        }
        assert!(text.contains(&format!("\nQuestion: {QUESTION}\nA) E2\nB) A1\nC) O1\nD) F1\n")));
    }
    let no_rag = fs::read_to_string(golden_dir().join("no_rag_direct_qa.txt")).unwrap();
    assert!(no_rag.contains("\nContext: (none)\n"));
    let contextual = fs::read_to_string(golden_dir().join("contextual_rag_cot.txt")).unwrap();
    assert!(contextual.contains("[arch.txt#"));
}
