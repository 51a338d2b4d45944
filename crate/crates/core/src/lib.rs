//! Pharmacovigilance signal detection from spontaneous reports: report
//! ingestion, co-occurrence vocabularies, ADE/drug embeddings trained with
//! negative sampling, lexicon retrofitting, disproportionality baselines and
//! reference-set evaluation.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod disproportionality;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod lexicon;
pub mod pipeline;
pub mod retrofit;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Table = embedding::VectorTable<f64>;
pub type Table32 = embedding::VectorTable<f32>;
pub type Embedding = embedding::EmbeddingSpace<f64>;
pub type Embedding32 = embedding::EmbeddingSpace<f32>;
pub type Retrofit = retrofit::RetrofitConfig<f64>;
pub type Retrofit32 = retrofit::RetrofitConfig<f32>;
