//! Retrieval-augmented multiple-choice QA: corpus chunking, embeddings, an
//! exact vector index, No-RAG / vanilla / choice-conditioned retrieval,
//! prompt assembly, model backends and a benchmark harness.

pub mod bench;
pub mod corpus;
pub mod embeddings;
mod error;
mod http;
pub mod index;
pub mod llm;
pub mod prompting;
pub mod registry;
pub mod retrieval;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use http::HttpError;
