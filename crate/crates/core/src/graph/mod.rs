//! Fragment-level relevance, edge selection, and the reasoning graph.

mod build;
mod export;
mod matrix;
mod select;

pub use build::{build_graph, normalize_edges, Edge, EdgeStrategy, Node, ReasoningGraph};
pub use export::{export_graph, parse_graph_json, to_dot, GraphFormat};
pub use matrix::{fragment_relevance_matrix, FragmentRelevance, SourceTokens};
pub use select::{select_edges_adaptive, select_edges_topk};
