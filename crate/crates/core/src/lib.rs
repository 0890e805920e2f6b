//! Hallucination detection for retrieval-augmented generation by tracing how
//! relevance flows from context fragments into answer fragments.

pub mod detect;
pub mod error;
pub mod graph;
pub mod lrp;
pub mod model;
pub mod par;
pub mod perturb;
pub mod pipeline;
pub mod segment;
pub mod synthetic;
pub mod tokenizer;

pub use error::{Error, Result};
