//! Layer-wise relevance propagation over micro-transformer traces.

mod conservation;
mod engine;
mod rules;

#[cfg(test)]
mod tests;

pub use conservation::{conservation_report, ConservationReport, LeakSource};
pub use engine::{
    attribute_response, attribute_token, attribute_token_logged, LrpConfig, RelevanceMatrix,
    RelevanceVector, RuleKind, StepLog,
};
pub use rules::{
    relevance_attention_av, relevance_bilinear_uniform, relevance_elementwise, relevance_linear,
    relevance_softmax, stabilize, DEFAULT_EPSILON,
};
