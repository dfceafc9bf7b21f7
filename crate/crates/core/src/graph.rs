//! Weighted-graph data model: vertex set, symmetric positive edge weights,
//! positive vertex measure, validation and connectivity.
//!
//! Every operator and solver in this crate works on a [`Graph`] together with
//! [`VertexFunction`]s defined on it. Both are immutable after construction
//! and cheap to share across threads.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation errors raised by [`build_graph`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({u},{v}) has non-positive weight {w}")]
    NonPositiveWeight { u: String, v: String, w: f64 },

    #[error("vertex {vertex} has non-positive measure {mu}")]
    NonPositiveMeasure { vertex: String, mu: f64 },

    #[error("self-loop at vertex {vertex}")]
    SelfLoop { vertex: String },

    #[error("edge ({u},{v}) references undeclared vertex {unknown}")]
    UnknownEndpoint { u: String, v: String, unknown: String },

    #[error("duplicate edge ({u},{v})")]
    DuplicateEdge { u: String, v: String },

    #[error("vertex {vertex} is declared more than once")]
    DuplicateVertex { vertex: String },

    #[error("graph is disconnected: vertex {vertex} is not reachable from {root}")]
    Disconnected { root: String, vertex: String },

    #[error("graph has no vertices")]
    Empty,

    #[error("function domain does not match the graph vertex set: {detail}")]
    DomainMismatch { detail: String },

    #[error("value for vertex {vertex} is not finite")]
    NonFiniteValue { vertex: String },
}

/// Raw graph description prior to validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: String,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    pub w: f64,
}

/// A finite connected graph with symmetric positive edge weights and a
/// positive vertex measure. Vertices are identified by opaque strings and
/// mapped internally to dense indices in declaration order, so all
/// downstream numerics iterate deterministically.
#[derive(Debug, Clone)]
pub struct Graph {
    vertices: Arc<Vec<String>>,
    index: HashMap<String, usize>,
    measure: Vec<f64>,
    // canonical (min_idx, max_idx, weight) in declaration order
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    volume: f64,
}

impl Graph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertex identifiers in declaration order.
    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.measure[i]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    /// Total measure Vol(V) = Σ_x μ(x).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Neighbors of vertex `i` as `(index, weight)` pairs, in declaration order.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub(crate) fn domain(&self) -> &Arc<Vec<String>> {
        &self.vertices
    }

    /// Checks that `f` is defined on exactly this graph's vertex set.
    pub fn check_domain(&self, f: &VertexFunction) -> Result<(), GraphError> {
        if Arc::ptr_eq(&self.vertices, &f.domain) || *self.vertices == *f.domain {
            Ok(())
        } else {
            Err(GraphError::DomainMismatch {
                detail: format!(
                    "graph has {} vertices, function is defined on {} different ones",
                    self.vertices.len(),
                    f.domain.len()
                ),
            })
        }
    }

    /// Serializes to the canonical JSON schema, preserving declaration order.
    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self
                .vertices
                .iter()
                .zip(&self.measure)
                .map(|(id, &mu)| VertexSpec { id: id.clone(), mu })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j, w)| EdgeSpec {
                    u: self.vertices[i].clone(),
                    v: self.vertices[j].clone(),
                    w,
                })
                .collect(),
        }
    }
}

/// Validates a raw description and builds a [`Graph`].
///
/// Rejects non-positive weights and measures, self-loops, unknown endpoints,
/// duplicate edges and disconnected graphs. Connectivity is a hard error:
/// the mean-zero Poisson solve and the spectral gap are only well-posed on
/// connected graphs.
pub fn build_graph(spec: &GraphSpec) -> Result<Graph, GraphError> {
    if spec.vertices.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut index = HashMap::with_capacity(spec.vertices.len());
    let mut vertices = Vec::with_capacity(spec.vertices.len());
    let mut measure = Vec::with_capacity(spec.vertices.len());
    for vs in &spec.vertices {
        if index.insert(vs.id.clone(), vertices.len()).is_some() {
            return Err(GraphError::DuplicateVertex { vertex: vs.id.clone() });
        }
        if !(vs.mu > 0.0) || !vs.mu.is_finite() {
            return Err(GraphError::NonPositiveMeasure { vertex: vs.id.clone(), mu: vs.mu });
        }
        vertices.push(vs.id.clone());
        measure.push(vs.mu);
    }

    let n = vertices.len();
    let mut seen = HashMap::new();
    let mut edges = Vec::with_capacity(spec.edges.len());
    let mut adjacency = vec![Vec::new(); n];
    for es in &spec.edges {
        let iu = *index.get(&es.u).ok_or_else(|| GraphError::UnknownEndpoint {
            u: es.u.clone(),
            v: es.v.clone(),
            unknown: es.u.clone(),
        })?;
        let iv = *index.get(&es.v).ok_or_else(|| GraphError::UnknownEndpoint {
            u: es.u.clone(),
            v: es.v.clone(),
            unknown: es.v.clone(),
        })?;
        if iu == iv {
            return Err(GraphError::SelfLoop { vertex: es.u.clone() });
        }
        if !(es.w > 0.0) || !es.w.is_finite() {
            return Err(GraphError::NonPositiveWeight { u: es.u.clone(), v: es.v.clone(), w: es.w });
        }
        let key = (iu.min(iv), iu.max(iv));
        if seen.insert(key, es.w).is_some() {
            return Err(GraphError::DuplicateEdge { u: es.u.clone(), v: es.v.clone() });
        }
        edges.push((key.0, key.1, es.w));
        adjacency[iu].push((iv, es.w));
        adjacency[iv].push((iu, es.w));
    }

    let volume = measure.iter().sum();
    let g = Graph {
        vertices: Arc::new(vertices),
        index,
        measure,
        edges,
        adjacency,
        volume,
    };
    if let Some(orphan) = first_unreachable(&g) {
        return Err(GraphError::Disconnected {
            root: g.vertices[0].clone(),
            vertex: g.vertices[orphan].clone(),
        });
    }
    Ok(g)
}

/// True iff every vertex is reachable from the first by edges.
pub fn is_connected(g: &Graph) -> bool {
    first_unreachable(g).is_none()
}

fn first_unreachable(g: &Graph) -> Option<usize> {
    let n = g.vertex_count();
    let mut visited = vec![false; n];
    let mut stack = vec![0usize];
    visited[0] = true;
    while let Some(x) = stack.pop() {
        for &(y, _) in g.neighbors(x) {
            if !visited[y] {
                visited[y] = true;
                stack.push(y);
            }
        }
    }
    visited.iter().position(|&v| !v)
}

/// A real-valued function on the vertex set of a particular graph.
///
/// Values are stored in the graph's declaration order. Operators check at
/// every call that the domain matches the graph they are given.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFunction {
    domain: Arc<Vec<String>>,
    values: Vec<f64>,
}

impl VertexFunction {
    /// Builds a function from per-vertex values in declaration order.
    pub fn from_values(g: &Graph, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != g.vertex_count() {
            return Err(GraphError::DomainMismatch {
                detail: format!(
                    "expected {} values, got {}",
                    g.vertex_count(),
                    values.len()
                ),
            });
        }
        Ok(Self { domain: g.domain().clone(), values })
    }

    pub fn constant(g: &Graph, value: f64) -> Self {
        Self {
            domain: g.domain().clone(),
            values: vec![value; g.vertex_count()],
        }
    }

    pub fn zero(g: &Graph) -> Self {
        Self::constant(g, 0.0)
    }

    pub fn from_fn(g: &Graph, mut f: impl FnMut(usize) -> f64) -> Self {
        Self {
            domain: g.domain().clone(),
            values: (0..g.vertex_count()).map(&mut f).collect(),
        }
    }

    /// Builds a function from an id→value map; the map must cover exactly
    /// the vertex set.
    pub fn from_map(g: &Graph, map: &HashMap<String, f64>) -> Result<Self, GraphError> {
        if map.len() != g.vertex_count() {
            for key in map.keys() {
                if g.vertex_index(key).is_none() {
                    return Err(GraphError::DomainMismatch {
                        detail: format!("value given for unknown vertex {key}"),
                    });
                }
            }
        }
        let mut values = Vec::with_capacity(g.vertex_count());
        for id in g.vertex_ids() {
            match map.get(id) {
                Some(&v) => values.push(v),
                None => {
                    return Err(GraphError::DomainMismatch {
                        detail: format!("no value for vertex {id}"),
                    })
                }
            }
        }
        Ok(Self { domain: g.domain().clone(), values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.domain
            .iter()
            .zip(&self.values)
            .map(|(id, &v)| (id.as_str(), v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Pointwise map; the result stays on the same domain.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination with another function on the same domain.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn shift(&self, s: f64) -> Self {
        self.map(|v| v + s)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub(crate) fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    /// TSV rendering: `vertex<TAB>value`, one row per vertex in declaration
    /// order, 17 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, v) in self.iter() {
            let _ = writeln!(out, "{id}\t{v:.16e}");
        }
        out
    }
}

impl Serialize for VertexFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        // nested under "values" to match the function file schema
        let mut outer = serializer.serialize_map(Some(1))?;
        outer.serialize_entry("values", &OrderedValues(self))?;
        outer.end()
    }
}

struct OrderedValues<'a>(&'a VertexFunction);

impl Serialize for OrderedValues<'_> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, v) in self.0.iter() {
            map.serialize_entry(id, &v)?;
        }
        map.end()
    }
}

/// Wire form of a function file: `{"values":{"a":1.0,...}}`.
#[derive(Debug, Deserialize)]
pub struct FunctionFile {
    pub values: HashMap<String, f64>,
}

/// Parses a graph from its canonical JSON schema.
pub fn parse_graph_json(text: &str) -> Result<Graph, serde_json::Error> {
    let spec: GraphSpec = serde_json::from_str(text)?;
    build_graph(&spec).map_err(|e| serde_json::Error::custom(e.to_string()))
}

/// Serializes a graph to its canonical JSON schema.
pub fn graph_to_json(g: &Graph) -> String {
    serde_json::to_string_pretty(&g.to_spec()).expect("graph serialization cannot fail")
}

/// Parses a function file against a graph, enforcing exact domain coverage.
pub fn parse_function_json(g: &Graph, text: &str) -> Result<VertexFunction, GraphError> {
    let file: FunctionFile = serde_json::from_str(text)
        .map_err(|e| GraphError::DomainMismatch { detail: format!("malformed function file: {e}") })?;
    VertexFunction::from_map(g, &file.values)
}
