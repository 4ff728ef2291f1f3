//! Learning-to-rank for cross-lingual retrieval with convolutional text
//! embeddings and graph-derived category embeddings.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: documents, judgments, tokenization, vocabularies, training
//!   pairs and category-overlap analysis.
//! - [`skipgram`]: skip-gram with negative sampling, used for both word and
//!   category pretraining.
//! - [`graph_embed`]: random walks over the category graph (DeepWalk).
//! - [`encoder`]: convolutional encoder with average pooling.
//! - [`ranker`]: the MLP relevance scorer, pairwise hinge loss and Adam
//!   training loop.
//! - [`retrieval`]: tf-idf inverted index, candidate pre-selection and
//!   weighted reranking.
//! - [`ensemble`]: stacked text/meta models.
//! - [`eval`]: NDCG, TREC run files, randomization tests and reports.
//! - [`config`], [`pipeline`] and [`synth`]: the command-line surface.

pub mod config;
pub mod corpus;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod graph_embed;
pub mod pipeline;
pub mod ranker;
pub mod retrieval;
pub mod skipgram;
pub mod synth;
mod util;

pub use error::{Error, Result};
