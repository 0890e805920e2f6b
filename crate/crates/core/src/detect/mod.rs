//! Fragment scoring and response-level hallucination verdicts.

mod lexical;
mod linearize;
mod scorer;
mod verdict;

pub use lexical::{lexical_alignment_score, term_set};
pub use linearize::{linearize_node, LinearizedUnit, DEFAULT_SEPARATOR};
pub use scorer::{
    BatchRequest, BatchResponse, FragmentScore, FragmentScorer, LexicalScorer, RemoteScorer,
    ScoreRequest, ScorerBinding, ScorerKind, DEFAULT_THRESHOLD,
};
pub use verdict::{
    alpha_sweep, classify_response, classify_scored, default_alphas, evaluate, metrics_from_pairs,
    Metrics, ResponseVerdict, SweepRow,
};
