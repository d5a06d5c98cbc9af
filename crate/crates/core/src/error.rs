use thiserror::Error;

use crate::bench::BenchError;
use crate::corpus::CorpusError;
use crate::embeddings::EmbedError;
use crate::index::IndexError;
use crate::llm::LlmError;
use crate::prompting::PromptError;
use crate::registry::UnknownName;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Registry(#[from] UnknownName),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the failure came from talking to a remote service.
    pub fn is_network(&self) -> bool {
        fn embed(e: &EmbedError) -> bool {
            matches!(e, EmbedError::Transport(_))
        }
        fn index(e: &IndexError) -> bool {
            matches!(e, IndexError::Embed(x) if embed(x))
        }
        match self {
            Self::Embed(e) => embed(e),
            Self::Index(e) => index(e),
            Self::Retrieval(RetrievalError::Embed(e)) => embed(e),
            Self::Retrieval(RetrievalError::Index(e)) => index(e),
            Self::Llm(e) => e.is_network(),
            _ => false,
        }
    }
}
