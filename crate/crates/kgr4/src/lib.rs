//! Desk-scale retrieve/retrospect/refine/rethink pipeline for constrained
//! keyword-to-sentence generation.
//!
//! The library is organized around the four stages:
//! - [`corpus`] + [`index`]: corpora, datasets and lexical prototype retrieval
//! - [`scorer`]: the binary relevance classifier used for ranking and rethink
//! - [`generator`]: the prototype-editing encoder-decoder and its objectives
//! - [`refiner`]: perturbation recipes and the denoising model
//! - [`eval`]: rethink selection, coverage, BLEU-4 and error metrics
//! - [`pipeline`]: end-to-end orchestration, config and run manifests
//!
//! See the `examples/` directory for runnable entry points per capability.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod generator;
pub mod index;
pub mod nn;
pub mod pipeline;
pub mod refiner;
pub mod scorer;
pub mod seq2seq;
pub mod text;

pub use error::{Kgr4Error, Result};
