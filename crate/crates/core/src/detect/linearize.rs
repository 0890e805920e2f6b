use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ReasoningGraph;
use crate::segment::Role;

/// Separator placed between source texts in a premise.
pub const DEFAULT_SEPARATOR: &str = " \n ";

/// Premise/hypothesis pair for one answer fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedUnit {
    pub node: usize,
    pub premise: String,
    pub hypothesis: String,
    /// Source node ids in premise order.
    pub sources: Vec<usize>,
    /// Set when the node has no incoming edges.
    pub empty_premise: bool,
}

/// Joins the texts of `dst`'s sources, highest normalized weight first
/// (ties by lower node id).
pub fn linearize_node(graph: &ReasoningGraph, dst: usize, separator: &str) -> Result<LinearizedUnit> {
    let node = graph
        .node(dst)
        .filter(|n| n.role == Role::Answer)
        .ok_or(Error::NotAnswerNode(dst))?;
    let mut edges: Vec<_> = graph.incoming(dst).collect();
    edges.sort_by(|a, b| {
        b.norm
            .partial_cmp(&a.norm)
            .unwrap_or(Ordering::Equal)
            .then(a.src.cmp(&b.src))
    });
    let mut texts = Vec::with_capacity(edges.len());
    for e in &edges {
        let src = graph
            .node(e.src)
            .ok_or_else(|| Error::InvalidArgument(format!("edge from unknown node {}", e.src)))?;
        texts.push(src.text.as_str());
    }
    Ok(LinearizedUnit {
        node: dst,
        premise: texts.join(separator),
        hypothesis: node.text.clone(),
        sources: edges.iter().map(|e| e.src).collect(),
        empty_premise: edges.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn graph(edges: Vec<Edge>) -> ReasoningGraph {
        let node = |id, role, text: &str| Node {
            id,
            role,
            text: text.into(),
            char_span: (0, 0),
        };
        ReasoningGraph {
            nodes: vec![
                node(0, Role::Context, "first"),
                node(1, Role::Context, "second"),
                node(2, Role::Answer, "claim"),
            ],
            edges,
        }
    }

    fn edge(src: usize, norm: f64) -> Edge {
        Edge { src, dst: 2, raw: norm, norm }
    }

    #[test]
    fn ordered_by_weight() {
        let g = graph(vec![edge(0, 0.4), edge(1, 1.0)]);
        let u = linearize_node(&g, 2, DEFAULT_SEPARATOR).unwrap();
        assert_eq!(u.premise, "second \n first");
        assert_eq!(u.sources, vec![1, 0]);
        assert_eq!(u.hypothesis, "claim");
        assert!(!u.empty_premise);
    }

    #[test]
    fn ties_by_index() {
        let g = graph(vec![edge(1, 1.0), edge(0, 1.0)]);
        assert_eq!(linearize_node(&g, 2, "|").unwrap().premise, "first|second");
    }

    #[test]
    fn empty_premise_flagged() {
        let u = linearize_node(&graph(vec![]), 2, DEFAULT_SEPARATOR).unwrap();
        assert_eq!(u.premise, "");
        assert!(u.empty_premise);
    }

    #[test]
    fn context_node_rejected() {
        assert!(matches!(
            linearize_node(&graph(vec![]), 0, DEFAULT_SEPARATOR),
            Err(Error::NotAnswerNode(0))
        ));
        assert!(linearize_node(&graph(vec![]), 9, DEFAULT_SEPARATOR).is_err());
    }
}
