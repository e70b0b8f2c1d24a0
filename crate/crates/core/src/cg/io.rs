//! JSON serialization of computation graphs.
//!
//! The on-disk document is versioned; the current version is `"1"`. Deserialization
//! re-validates the graph, so a schema-correct document describing an invalid graph
//! is still rejected.

use serde::{Deserialize, Serialize};

use super::{validate, CGNode, ComputationGraph};
use crate::error::{Error, Result};

pub const CG_FORMAT_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct CgFile {
    version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    family: Option<String>,
    nodes: Vec<CGNode>,
    edges: Vec<(usize, usize)>,
}

impl ComputationGraph {
    /// Serialize to the versioned JSON document. The graph must be valid.
    pub fn to_json(&self) -> Result<String> {
        let report = validate(self);
        if !report.ok() {
            return Err(Error::InvalidGraph(report));
        }
        let file = CgFile {
            version: CG_FORMAT_VERSION.to_string(),
            family: self.family.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parse and validate a versioned JSON document.
    pub fn from_json(text: &str) -> Result<ComputationGraph> {
        let file: CgFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if file.version != CG_FORMAT_VERSION {
            return Err(Error::Version(file.version));
        }
        let graph = ComputationGraph {
            nodes: file.nodes,
            edges: file.edges,
            family: file.family,
        };
        let report = validate(&graph);
        if !report.ok() {
            return Err(Error::InvalidGraph(report));
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::{testutil, Shape};

    #[test]
    fn round_trip_identity() {
        let g = testutil::relu_chain(Shape::new(32, 32, 16));
        let text = g.to_json().unwrap();
        let back = ComputationGraph::from_json(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn truncated_document_is_a_parse_error() {
        let g = testutil::relu_chain(Shape::new(32, 32, 16));
        let text = g.to_json().unwrap();
        let truncated = &text[..text.len() / 2];
        match ComputationGraph::from_json(truncated) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line"), "locus in: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_op_kind_names_the_variant() {
        let g = testutil::relu_chain(Shape::new(32, 32, 16));
        let text = g.to_json().unwrap().replace("\"ReLU\"", "\"Conv3D\"");
        match ComputationGraph::from_json(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("Conv3D"), "field named in: {msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let g = testutil::relu_chain(Shape::new(32, 32, 16));
        let text = g.to_json().unwrap().replacen("\"version\": \"1\"", "\"version\": \"9\"", 1);
        assert!(matches!(ComputationGraph::from_json(&text), Err(Error::Version(v)) if v == "9"));
    }

    #[test]
    fn schema_valid_but_invalid_graph_rejected() {
        let mut g = testutil::relu_chain(Shape::new(32, 32, 16));
        g.nodes[1].in_shape = Shape::new(16, 16, 16); // breaks edge compatibility
        let file = CgFile {
            version: CG_FORMAT_VERSION.into(),
            family: None,
            nodes: g.nodes.clone(),
            edges: g.edges.clone(),
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(matches!(
            ComputationGraph::from_json(&text),
            Err(Error::InvalidGraph(_))
        ));
    }
}
