use std::fmt::Write;
use std::str::FromStr;

use super::build::ReasoningGraph;
use crate::error::{Error, Result};
use crate::segment::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "graph-json" | "json" => Ok(GraphFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Dot => "dot",
            GraphFormat::Json => "json",
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

pub fn to_dot(g: &ReasoningGraph) -> String {
    let mut s = String::from("digraph reasoning {\n    rankdir=LR;\n");
    for n in &g.nodes {
        let style = match n.role {
            Role::Context => "shape=box, style=filled, fillcolor=\"#dbe8f5\"",
            Role::Answer => "shape=ellipse, style=filled, fillcolor=\"#f7e1c9\"",
        };
        let _ = writeln!(s, "    n{} [label=\"{}\", {}];", n.id, escape(&n.text), style);
    }
    for e in &g.edges {
        let _ = writeln!(s, "    n{} -> n{} [label=\"{:.3}\"];", e.src, e.dst, e.norm);
    }
    s.push_str("}\n");
    s
}

pub fn export_graph(g: &ReasoningGraph, format: GraphFormat) -> Result<String> {
    match format {
        GraphFormat::Dot => Ok(to_dot(g)),
        GraphFormat::Json => Ok(serde_json::to_string_pretty(g)? + "\n"),
    }
}

pub fn parse_graph_json(text: &str) -> Result<ReasoningGraph> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn toy() -> ReasoningGraph {
        let node = |id, role, text: &str| Node {
            id,
            role,
            text: text.into(),
            char_span: (id * 10, id * 10 + text.len()),
        };
        ReasoningGraph {
            nodes: vec![
                node(0, Role::Context, "Paris is in France."),
                node(1, Role::Context, "It says \"hi\"."),
                node(2, Role::Answer, "Paris is French."),
                node(3, Role::Answer, "It greets."),
            ],
            edges: vec![
                Edge { src: 0, dst: 2, raw: 0.5, norm: 1.0 },
                Edge { src: 1, dst: 3, raw: 0.2, norm: 1.0 },
                Edge { src: 2, dst: 3, raw: 0.1, norm: 0.5 },
            ],
        }
    }

    #[test]
    fn empty_graph_is_valid_dot() {
        let dot = to_dot(&ReasoningGraph::default());
        assert_eq!(dot, "digraph reasoning {\n    rankdir=LR;\n}\n");
    }

    #[test]
    fn dot_styles_and_labels() {
        let dot = to_dot(&toy());
        assert!(dot.contains("n0 [label=\"Paris is in France.\", shape=box"));
        assert!(dot.contains("n2 [label=\"Paris is French.\", shape=ellipse"));
        assert!(dot.contains("n2 -> n3 [label=\"0.500\"]"));
        assert!(dot.contains("It says \\\"hi\\\"."));
    }

    #[test]
    fn json_round_trip() {
        let g = toy();
        let text = export_graph(&g, GraphFormat::Json).unwrap();
        assert_eq!(parse_graph_json(&text).unwrap(), g);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"][2]["role"], "answer");
        assert_eq!(v["nodes"][0]["char_span"], serde_json::json!([0, 19]));
        assert_eq!(v["edges"][0]["norm"], 1.0);
    }

    #[test]
    fn unknown_format() {
        assert!(matches!("svg".parse::<GraphFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!("graph-json".parse::<GraphFormat>().unwrap(), GraphFormat::Json);
    }
}
