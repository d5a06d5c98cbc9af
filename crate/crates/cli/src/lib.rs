//! `corag` command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad input or configuration,
//! 3 network failure talking to an embedding or model server.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::SettingsArgs;

pub const TOOL: &str = "corag";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Internal = 1,
    Input = 2,
    Network = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Input,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Internal,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Library errors are input errors unless a remote call failed.
impl From<corag_core::Error> for Failure {
    fn from(e: corag_core::Error) -> Self {
        Self {
            code: if e.is_network() {
                ExitCode::Network
            } else {
                ExitCode::Input
            },
            message: e.to_string(),
        }
    }
}

macro_rules! via_core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                corag_core::Error::from(e).into()
            }
        }
    )*};
}

via_core_error!(
    corag_core::corpus::CorpusError,
    corag_core::embeddings::EmbedError,
    corag_core::index::IndexError,
    corag_core::retrieval::RetrievalError,
    corag_core::prompting::PromptError,
    corag_core::llm::LlmError,
    corag_core::bench::BenchError,
    corag_core::registry::UnknownName
);

#[derive(Debug, Parser)]
#[command(
    name = "corag",
    version,
    about = "Retrieval-augmented multiple-choice QA and benchmark harness"
)]
pub struct Cli {
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and chunk a corpus into a chunk file
    Ingest {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// plain_dir or jsonl; guessed from the path when omitted
        #[arg(long)]
        format: Option<String>,
        /// Check that the chunks cover every source character
        #[arg(long)]
        verify: bool,
    },
    /// Embed a chunk file into an index
    Index {
        chunks: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Answer one question
    Ask {
        #[arg(long)]
        index: Option<PathBuf>,
        /// none, rag or corag
        #[arg(long, default_value = "corag")]
        strategy: String,
        /// qa or cot
        #[arg(long, default_value = "qa")]
        prompt: String,
        question: String,
        #[arg(num_args = 4, required = true)]
        options: Vec<String>,
    },
    /// Run a strategy × prompt grid over a dataset
    Bench {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// canonical_jsonl or oran_bench_json
        #[arg(long, default_value = "canonical_jsonl")]
        dataset_format: String,
        /// Repeatable; all three when omitted
        #[arg(long)]
        strategy: Vec<String>,
        /// Repeatable; both when omitted
        #[arg(long)]
        prompt: Vec<String>,
        /// Seeded sample size per difficulty; every item when omitted
        #[arg(long)]
        per_difficulty: Option<usize>,
        /// Run items concurrently (latencies become non-comparable)
        #[arg(long)]
        parallel: bool,
        /// Directory for records.jsonl, report.json and report.md
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render a report from records (.jsonl) or a report (.json)
    Report {
        input: PathBuf,
        /// json or markdown
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic discriminative corpus and questions
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = corag_core::synthetic::DEFAULT_QUESTIONS)]
        questions: usize,
    },
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return ExitCode::Input as i32;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match commands::dispatch(&cli, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code as i32
        }
    }
}
