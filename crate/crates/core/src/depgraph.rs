//! The directed dependency graph over object, query, and mutation nodes:
//! construction, starting-node selection, DOT export, and the JSON artifact
//! the test phase reloads.

use crate::compiler::{Action, DepStrength, Endpoint, EndpointKind};
use crate::schema::SchemaDocument;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeType {
    Object,
    Query,
    Mutation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphNode {
    pub name: String,
    pub node_type: NodeType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_type: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub strength: DepStrength,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no query or mutation nodes")]
    EmptyGraph,
}

/// Immutable after build; adjacency indices are kept consistent with the
/// edge set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: BTreeMap<String, GraphNode>,
    pub edges: BTreeSet<GraphEdge>,
    #[serde(skip)]
    adjacency: BTreeMap<String, BTreeSet<String>>,
    #[serde(skip)]
    reverse: BTreeMap<String, BTreeSet<String>>,
}

impl DependencyGraph {
    fn insert_node(&mut self, node: GraphNode) {
        self.nodes.insert(node.name.clone(), node);
    }

    fn insert_edge(&mut self, from: &str, to: &str, strength: DepStrength) {
        debug_assert!(self.nodes.contains_key(from) && self.nodes.contains_key(to));
        self.edges.insert(GraphEdge {
            from: from.to_string(),
            to: to.to_string(),
            strength,
        });
        self.adjacency.entry(from.to_string()).or_default().insert(to.to_string());
        self.reverse.entry(to.to_string()).or_default().insert(from.to_string());
    }

    /// Rebuilds adjacency indices (after deserialization).
    pub fn reindex(&mut self) {
        self.adjacency.clear();
        self.reverse.clear();
        let edges: Vec<GraphEdge> = self.edges.iter().cloned().collect();
        for e in edges {
            self.adjacency.entry(e.from.clone()).or_default().insert(e.to.clone());
            self.reverse.entry(e.to).or_default().insert(e.from);
        }
    }

    /// Successors in lexicographic order.
    pub fn children(&self, name: &str) -> Vec<String> {
        self.adjacency
            .get(name)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Distinct predecessors (a parallel hard+soft pair counts once).
    pub fn in_degree(&self, name: &str) -> usize {
        self.reverse.get(name).map(|s| s.len()).unwrap_or(0)
    }

    pub fn node(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.get(name)
    }

    pub fn request_nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes
            .values()
            .filter(|n| n.node_type != NodeType::Object)
    }
}

/// Builds the graph: one node per object/query/mutation, one edge
/// object -> endpoint per input dependency and endpoint -> output object per
/// output. Object-object edges are never created.
pub fn build_graph(endpoints: &[Endpoint], schema: &SchemaDocument) -> DependencyGraph {
    let mut g = DependencyGraph::default();
    for name in schema.object_types.keys() {
        g.insert_node(GraphNode {
            name: name.clone(),
            node_type: NodeType::Object,
            mutation_type: None,
        });
    }
    for ep in endpoints {
        let (node_type, mutation_type) = match ep.kind {
            EndpointKind::Query => (NodeType::Query, None),
            EndpointKind::Mutation => (NodeType::Mutation, Some(ep.action)),
        };
        g.insert_node(GraphNode {
            name: ep.name.clone(),
            node_type,
            mutation_type,
        });
    }
    for ep in endpoints {
        for dep in &ep.input_deps {
            if g.nodes.contains_key(&dep.object_name) {
                g.insert_edge(&dep.object_name, &ep.name, dep.strength);
            }
        }
        if let Some(out) = &ep.output_object {
            if g.nodes.contains_key(out) {
                g.insert_edge(&ep.name, out, DepStrength::Hard);
            }
        }
    }
    g
}

/// All query/mutation nodes at the minimum in-degree, lexicographic.
/// In-degree 0 nodes are the independent starting points; in fully cyclical
/// graphs the threshold rises until a node qualifies.
pub fn select_starting_nodes(graph: &DependencyGraph) -> Result<Vec<String>, GraphError> {
    let request_nodes: Vec<&GraphNode> = graph.request_nodes().collect();
    if request_nodes.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let min = request_nodes
        .iter()
        .map(|n| graph.in_degree(&n.name))
        .min()
        .unwrap();
    Ok(request_nodes
        .iter()
        .filter(|n| graph.in_degree(&n.name) == min)
        .map(|n| n.name.clone())
        .collect())
}

/// Deterministic DOT rendering: boxes for objects, ellipses for queries,
/// diamonds for mutations (labeled with their action); dashed soft edges.
pub fn export_dot(graph: &DependencyGraph) -> String {
    let mut out = String::from("digraph g {\n");
    for node in graph.nodes.values() {
        match node.node_type {
            NodeType::Object => {
                out.push_str(&format!("  \"{}\" [shape=box];\n", node.name));
            }
            NodeType::Query => {
                out.push_str(&format!("  \"{}\" [shape=ellipse];\n", node.name));
            }
            NodeType::Mutation => {
                let action = node
                    .mutation_type
                    .map(|a| format!("{a:?}").to_uppercase())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "  \"{}\" [shape=diamond, label=\"{}\\n({})\"];\n",
                    node.name, node.name, action
                ));
            }
        }
    }
    for edge in &graph.edges {
        let style = match edge.strength {
            DepStrength::Hard => "solid",
            DepStrength::Soft => "dashed",
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [style={}];\n",
            edge.from, edge.to, style
        ));
    }
    out.push_str("}\n");
    if graph.nodes.is_empty() {
        return "digraph g {\n}\n".to_string();
    }
    out
}

/// Serializes the graph as the compile-phase JSON artifact.
pub fn graph_to_json(graph: &DependencyGraph) -> serde_json::Value {
    serde_json::to_value(graph).unwrap()
}

pub fn graph_from_json(value: &serde_json::Value) -> Result<DependencyGraph, String> {
    let mut g: DependencyGraph =
        serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    for e in &g.edges {
        if !g.nodes.contains_key(&e.from) || !g.nodes.contains_key(&e.to) {
            return Err(format!("edge {} -> {} references a missing node", e.from, e.to));
        }
    }
    g.reindex();
    Ok(g)
}
