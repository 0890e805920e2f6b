use serde::{Deserialize, Serialize};

use super::matrix::FragmentRelevance;
use super::select::{select_edges_adaptive, select_edges_topk};
use crate::error::{Error, Result};
use crate::segment::{Document, Role};

/// How source fragments are chosen for each answer fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStrategy {
    TopK(usize),
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub role: Role,
    pub text: String,
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub raw: f64,
    pub norm: f64,
}

/// Fragments as nodes, with weighted edges from sources into answer fragments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReasoningGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl ReasoningGraph {
    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn answer_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.role == Role::Answer)
    }

    pub fn incoming(&self, dst: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == dst)
    }
}

/// Selected sources of one destination with normalized weights.
///
/// Weights are divided by the largest selected raw weight. When that maximum
/// is positive, sources with non-positive raw weight are dropped so every
/// normalized weight lies in (0, 1]; otherwise every kept source gets 1.0.
pub fn normalize_edges(dst: usize, selected: &[(usize, f64)]) -> Vec<Edge> {
    let max = selected
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    selected
        .iter()
        .filter(|&&(_, raw)| max <= 0.0 || raw > 0.0)
        .map(|&(src, raw)| Edge {
            src,
            dst,
            raw,
            norm: if max > 0.0 { raw / max } else { 1.0 },
        })
        .collect()
}

pub fn build_graph(doc: &Document, w: &FragmentRelevance, strategy: EdgeStrategy) -> Result<ReasoningGraph> {
    if strategy == EdgeStrategy::TopK(0) {
        return Err(Error::InvalidArgument("top-k needs k >= 1".into()));
    }
    if w.n_context != doc.n_context || w.n_answer != doc.answer_fragments().len() {
        return Err(Error::Shape(format!(
            "relevance matrix is {}+{} fragments, document has {}+{}",
            w.n_context,
            w.n_answer,
            doc.n_context,
            doc.answer_fragments().len()
        )));
    }
    let nodes = doc
        .fragments
        .iter()
        .map(|f| Node {
            id: f.id,
            role: f.role,
            text: f.text.clone(),
            char_span: f.char_span,
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..w.n_answer {
        let scores = w.candidates(i);
        let chosen = match strategy {
            EdgeStrategy::TopK(k) => select_edges_topk(&scores, k),
            EdgeStrategy::Adaptive => select_edges_adaptive(&scores),
        };
        let selected: Vec<(usize, f64)> = chosen.into_iter().map(|j| (j, scores[j])).collect();
        edges.extend(normalize_edges(w.n_context + i, &selected));
    }
    Ok(ReasoningGraph { nodes, edges })
}
