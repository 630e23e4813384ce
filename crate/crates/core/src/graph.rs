//! Combinatorial metric graphs: a finite multigraph with a positive length
//! per edge, plus the structural classification used by the rest of the
//! crate (loops, mandarin/flower shape, standing assumptions).

use std::collections::BTreeSet;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

/// One edge of a metric graph. `tail` and `head` are vertex indices; the
/// arc-length coordinate `t` runs from 0 at the tail to `length` at the head.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// A connected metric graph. Edges are identified by their index (0..N-1),
/// never by endpoint pair, so parallel edges are first class. The edge index
/// fixes the coordinate order of the torus variables `z` and of the length
/// vector everywhere downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("unknown vertex reference {0:?}")]
    UnknownVertex(String),
    #[error("non-positive length {length} on edge {edge}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("edge ids must be exactly 0..{expected}, got {got:?}")]
    BadEdgeIds { expected: usize, got: Vec<usize> },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph has no edges")]
    Empty,
    #[error("duplicate vertex name {0:?}")]
    DuplicateVertex(String),
    #[error("length count {got} does not match edge count {expected}")]
    LengthCount { expected: usize, got: usize },
}

#[derive(Deserialize)]
struct GraphDoc {
    vertices: Vec<String>,
    edges: Vec<EdgeDoc>,
}

#[derive(Deserialize)]
struct EdgeDoc {
    id: usize,
    tail: String,
    head: String,
    length: f64,
}

impl MetricGraph {
    /// Builds a graph from vertex names and edges, validating every invariant:
    /// positive lengths, valid endpoints, connectivity.
    pub fn new(vertex_names: Vec<String>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = BTreeSet::new();
        for name in &vertex_names {
            if !seen.insert(name.clone()) {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let v = vertex_names.len();
        for (j, e) in edges.iter().enumerate() {
            if e.tail >= v {
                return Err(GraphError::UnknownVertex(format!("#{}", e.tail)));
            }
            if e.head >= v {
                return Err(GraphError::UnknownVertex(format!("#{}", e.head)));
            }
            if e.length <= 0.0 || !e.length.is_finite() {
                return Err(GraphError::NonPositiveLength {
                    edge: j,
                    length: e.length,
                });
            }
        }
        let g = MetricGraph {
            vertex_names,
            edges,
        };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    /// Parses the graph description document: a JSON object with `vertices`
    /// (list of names) and `edges` (records `{id, tail, head, length}`).
    /// Edge ids must be exactly 0..N-1; they define the coordinate order.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc =
            serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        let lookup = |name: &str| -> Result<usize, GraphError> {
            doc.vertices
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
        };
        let n = doc.edges.len();
        let mut slots: Vec<Option<Edge>> = vec![None; n];
        let mut ids: Vec<usize> = doc.edges.iter().map(|e| e.id).collect();
        for e in &doc.edges {
            let parsed = Edge {
                tail: lookup(&e.tail)?,
                head: lookup(&e.head)?,
                length: e.length,
            };
            if e.id >= n || slots[e.id].is_some() {
                ids.sort_unstable();
                return Err(GraphError::BadEdgeIds {
                    expected: n,
                    got: ids,
                });
            }
            slots[e.id] = Some(parsed);
        }
        let edges = slots.into_iter().map(|s| s.unwrap()).collect();
        MetricGraph::new(doc.vertices, edges)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &Edge {
        &self.edges[j]
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertex_names[v]
    }

    /// Vertex degree; a loop contributes two incidences.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.tail == v) as usize + (e.head == v) as usize)
            .sum()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Same combinatorial graph with a different length vector, indexed by
    /// edge id. Used by experiments that scan over random lengths.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self, GraphError> {
        if lengths.len() != self.edges.len() {
            return Err(GraphError::LengthCount {
                expected: self.edges.len(),
                got: lengths.len(),
            });
        }
        let mut edges = self.edges.clone();
        for (j, e) in edges.iter_mut().enumerate() {
            if lengths[j] <= 0.0 || !lengths[j].is_finite() {
                return Err(GraphError::NonPositiveLength {
                    edge: j,
                    length: lengths[j],
                });
            }
            e.length = lengths[j];
        }
        Ok(MetricGraph {
            vertex_names: self.vertex_names.clone(),
            edges,
        })
    }

    fn is_connected(&self) -> bool {
        let v = self.vertex_names.len();
        if v == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); v];
        for e in &self.edges {
            adj[e.tail].push(e.head);
            adj[e.head].push(e.tail);
        }
        let mut visited = vec![false; v];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        visited.into_iter().all(|b| b)
    }

    /// Structural classification and the standing-assumption check.
    pub fn classify(&self) -> GraphClass {
        let n = self.edge_count();
        let v = self.vertex_count();
        let loop_edges: BTreeSet<usize> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_loop())
            .map(|(j, _)| j)
            .collect();
        let degrees: Vec<usize> = (0..v).map(|u| self.degree(u)).collect();

        let is_flower = v == 1 && loop_edges.len() == n;
        let is_mandarin = v == 2 && loop_edges.is_empty();

        let mut violation_reasons = Vec::new();
        if degrees.contains(&2) {
            violation_reasons.push(AssumptionViolation::DegreeTwoVertex);
        }
        // A single cycle (polygon or lone loop) has every vertex of degree
        // two, so it is already caught above; record the sharper reason too.
        if degrees.iter().all(|&d| d == 2) {
            violation_reasons.push(AssumptionViolation::SingleCycle);
        }

        GraphClass {
            satisfies_assumption: violation_reasons.is_empty(),
            violation_reasons,
            loop_edges,
            is_mandarin,
            is_flower,
        }
    }

    // Builders for the graph families the crate's experiments revolve around.

    /// Single edge of the given length (the Neumann interval).
    pub fn interval(length: f64) -> Self {
        MetricGraph::new(
            vec!["v0".into(), "v1".into()],
            vec![Edge {
                tail: 0,
                head: 1,
                length,
            }],
        )
        .expect("interval")
    }

    /// Star: one center, a leaf per edge.
    pub fn star(lengths: &[f64]) -> Self {
        let mut names = vec!["c".to_string()];
        let mut edges = Vec::new();
        for (j, &len) in lengths.iter().enumerate() {
            names.push(format!("u{j}"));
            edges.push(Edge {
                tail: 0,
                head: j + 1,
                length: len,
            });
        }
        MetricGraph::new(names, edges).expect("star")
    }

    /// Mandarin: two vertices joined by every edge in parallel.
    pub fn mandarin(lengths: &[f64]) -> Self {
        let edges = lengths
            .iter()
            .map(|&len| Edge {
                tail: 0,
                head: 1,
                length: len,
            })
            .collect();
        MetricGraph::new(vec!["v0".into(), "v1".into()], edges).expect("mandarin")
    }

    /// Flower: a single vertex with every edge a loop.
    pub fn flower(lengths: &[f64]) -> Self {
        let edges = lengths
            .iter()
            .map(|&len| Edge {
                tail: 0,
                head: 0,
                length: len,
            })
            .collect();
        MetricGraph::new(vec!["v".into()], edges).expect("flower")
    }

    /// Lasso: edge 0 is a loop at the center, the remaining edges are
    /// pendant tails from the center.
    pub fn lasso(loop_length: f64, tail_lengths: &[f64]) -> Self {
        let mut names = vec!["v".to_string()];
        let mut edges = vec![Edge {
            tail: 0,
            head: 0,
            length: loop_length,
        }];
        for (j, &len) in tail_lengths.iter().enumerate() {
            names.push(format!("u{j}"));
            edges.push(Edge {
                tail: 0,
                head: j + 1,
                length: len,
            });
        }
        MetricGraph::new(names, edges).expect("lasso")
    }
}

/// Why a graph fails the standing assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionViolation {
    DegreeTwoVertex,
    SingleCycle,
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssumptionViolation::DegreeTwoVertex => write!(f, "degree-two vertex"),
            AssumptionViolation::SingleCycle => write!(f, "single cycle"),
        }
    }
}

/// Structural flags of a graph. `satisfies_assumption` is the gate for all
/// genericity statements: connected, finite, no degree-two vertices, not a
/// single cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphClass {
    pub satisfies_assumption: bool,
    pub violation_reasons: Vec<AssumptionViolation>,
    pub loop_edges: BTreeSet<usize>,
    pub is_mandarin: bool,
    pub is_flower: bool,
}
