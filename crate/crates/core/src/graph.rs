//! Directed weighted networks with a virtual source node, their Laplacian and
//! the pinned (source-removed) partition.
//!
//! Node indices are 0-based in this API. The JSON document format uses
//! 1-based labels; conversion happens in [`parse_graph`] and [`emit_graph`].

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four-agent chain used throughout the test-suite: 4→3→2→1 with a
/// two-way link between 3 and 4 and the source feeding node 4.
pub const EXAMPLE_GRAPH_JSON: &str =
    r#"{"nodes": 5, "source": 5, "edges": [[5,4,1.0],[4,3,1.0],[3,4,1.0],[3,2,1.0],[2,1,1.0]]}"#;

/// Information flows from `from` into `to`; the weight is `a[to][from]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    node_count: usize,
    source: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    nodes: usize,
    source: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl GraphSpec {
    /// Validates and builds a graph. `node_count` includes the source.
    pub fn new(node_count: usize, source: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::Malformed(format!(
                "need at least one agent besides the source, got {node_count} nodes"
            )));
        }
        if source >= node_count {
            return Err(Error::NodeOutOfRange { node: source + 1, count: node_count });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            for node in [e.from, e.to] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node: node + 1, count: node_count });
                }
            }
            if e.from == e.to {
                return Err(Error::SelfEdge(e.from + 1));
            }
            if e.weight <= 0.0 || !e.weight.is_finite() {
                return Err(Error::NonPositiveWeight {
                    from: e.from + 1,
                    to: e.to + 1,
                    weight: e.weight,
                });
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::DuplicateEdge { from: e.from + 1, to: e.to + 1 });
            }
        }
        Ok(Self { node_count, source, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of non-source agents.
    pub fn agent_count(&self) -> usize {
        self.node_count - 1
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Incoming neighbours of `node` as `(neighbour, weight)`.
    pub fn in_neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges.iter().filter(move |e| e.to == node).map(|e| (e.from, e.weight))
    }

    /// Same graph without the edge `from -> to`, if present.
    pub fn without_edge(&self, from: usize, to: usize) -> Self {
        Self {
            node_count: self.node_count,
            source: self.source,
            edges: self.edges.iter().copied().filter(|e| !(e.from == from && e.to == to)).collect(),
        }
    }
}

/// Parses the JSON graph document (`{"nodes", "source", "edges": [[from, to, w], ...]}`).
pub fn parse_graph(text: &str) -> Result<GraphSpec> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let label = |x: usize| -> Result<usize> {
        if x == 0 || x > doc.nodes {
            Err(Error::NodeOutOfRange { node: x, count: doc.nodes })
        } else {
            Ok(x - 1)
        }
    };
    let source = label(doc.source)?;
    let edges = doc
        .edges
        .iter()
        .map(|&(from, to, weight)| Ok(Edge { from: label(from)?, to: label(to)?, weight }))
        .collect::<Result<Vec<_>>>()?;
    GraphSpec::new(doc.nodes, source, edges)
}

/// Serializes a graph back into the JSON document format.
pub fn emit_graph(g: &GraphSpec) -> String {
    let doc = GraphDocument {
        nodes: g.node_count,
        source: g.source + 1,
        edges: g.edges.iter().map(|e| (e.from + 1, e.to + 1, e.weight)).collect(),
    };
    serde_json::to_string(&doc).expect("graph document serializes")
}

/// The network used in the worked example, already validated.
pub fn example_graph() -> GraphSpec {
    parse_graph(EXAMPLE_GRAPH_JSON).expect("built-in example is valid")
}

/// Full (n+1)×(n+1) Laplacian in node order; every row sums to zero.
pub fn build_laplacian(g: &GraphSpec) -> DMatrix<f64> {
    let n = g.node_count;
    let mut l = DMatrix::zeros(n, n);
    for e in &g.edges {
        l[(e.to, e.from)] -= e.weight;
        l[(e.to, e.to)] += e.weight;
    }
    l
}

/// Pinned Laplacian `K` and source coupling `B` of the non-source agents.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedSystem {
    k: DMatrix<f64>,
    b: DVector<f64>,
    node_order: Vec<usize>,
}

impl PinnedSystem {
    /// Builds a pinned system directly from `K` and `B`; rows map to nodes `0..n`.
    pub fn new(k: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !k.is_square() || k.nrows() != b.len() || k.nrows() == 0 {
            return Err(Error::Malformed(format!(
                "K is {}x{} but B has {} entries",
                k.nrows(),
                k.ncols(),
                b.len()
            )));
        }
        if k.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Malformed("non-finite entry in K or B".into()));
        }
        let node_order = (0..b.len()).collect();
        Ok(Self { k, b, node_order })
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Graph node (0-based) behind each matrix row.
    pub fn node_order(&self) -> &[usize] {
        &self.node_order
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Solves `K x = B` by LU. For rooted graphs the solution is the all-ones
    /// vector; `None` when `K` is singular or the residual exceeds 1e-9.
    pub fn steady_state_direction(&self) -> Option<DVector<f64>> {
        let x = self.k.clone().lu().solve(&self.b)?;
        let residual = (&self.k * &x - &self.b).amax();
        (x.iter().all(|v| v.is_finite()) && residual <= 1e-9).then_some(x)
    }
}

/// Removes the source row and column from the Laplacian.
pub fn pin(g: &GraphSpec) -> PinnedSystem {
    let l = build_laplacian(g);
    let node_order: Vec<usize> = (0..g.node_count).filter(|&i| i != g.source).collect();
    let n = node_order.len();
    let k = DMatrix::from_fn(n, n, |r, c| l[(node_order[r], node_order[c])]);
    let b = DVector::from_fn(n, |r, _| -l[(node_order[r], g.source)]);
    PinnedSystem { k, b, node_order }
}

/// Reachability of every agent from the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rootedness {
    pub rooted: bool,
    /// 0-based node indices not reachable from the source, ascending.
    pub unreachable: Vec<usize>,
}

impl Rootedness {
    /// 1-based labels as used in graph documents.
    pub fn unreachable_labels(&self) -> Vec<usize> {
        self.unreachable.iter().map(|i| i + 1).collect()
    }

    pub fn into_result(self) -> Result<()> {
        if self.rooted {
            Ok(())
        } else {
            Err(Error::NotRooted(self.unreachable_labels()))
        }
    }
}

/// Breadth-first search from the source along edge direction.
pub fn check_rooted(g: &GraphSpec) -> Rootedness {
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); g.node_count];
    for e in &g.edges {
        out[e.from].push(e.to);
    }
    let mut visited = vec![false; g.node_count];
    let mut queue = VecDeque::from([g.source]);
    visited[g.source] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &out[u] {
            if !visited[v] {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    let unreachable: Vec<usize> = (0..g.node_count).filter(|&i| !visited[i]).collect();
    Rootedness { rooted: unreachable.is_empty(), unreachable }
}

/// The example pinned Laplacian with a weight-`e` link from agent 1 into agent 2.
pub fn perturbed_example(e: f64) -> Result<PinnedSystem> {
    if e < 0.0 || !e.is_finite() {
        return Err(Error::Domain(format!("perturbation must be finite and >= 0, got {e}")));
    }
    #[rustfmt::skip]
    let k = DMatrix::from_row_slice(4, 4, &[
        1.0, -1.0,    0.0,  0.0,
        e,   1.0 - e, -1.0, 0.0,
        0.0, 0.0,     1.0,  -1.0,
        0.0, 0.0,     -1.0, 2.0,
    ]);
    PinnedSystem::new(k, DVector::from_row_slice(&[0.0, 0.0, 0.0, 1.0]))
}
