#![allow(dead_code)]

use consensus_lab::graph::{Edge, GraphSpec};
use consensus_lab::spectral::C64;
use rand::rngs::StdRng;
use rand::Rng;

/// Random source-rooted graph with `1..=max_agents` agents: a random spanning
/// arborescence out of the source plus a few extra edges.
pub fn random_rooted_graph(rng: &mut StdRng, max_agents: usize) -> GraphSpec {
    let agents = rng.random_range(1..=max_agents);
    let n = agents + 1;
    let source = rng.random_range(0..n);
    let mut order: Vec<usize> = (0..n).filter(|&i| i != source).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut reached = vec![source];
    let mut edges = Vec::new();
    let mut used = std::collections::HashSet::new();
    for &v in &order {
        let u = reached[rng.random_range(0..reached.len())];
        edges.push(Edge { from: u, to: v, weight: rng.random_range(0.2..2.0) });
        used.insert((u, v));
        reached.push(v);
    }
    let extra = rng.random_range(0..=2 * agents);
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = order[rng.random_range(0..order.len())];
        if u != v && used.insert((u, v)) {
            edges.push(Edge { from: u, to: v, weight: rng.random_range(0.2..2.0) });
        }
    }
    GraphSpec::new(n, source, edges).expect("generated graph is valid")
}

/// Roots of `z² + c1 z + c0` by the textbook formula.
pub fn textbook_roots(c1: C64, c0: C64) -> [C64; 2] {
    let d = (c1 * c1 - c0 * 4.0).sqrt();
    [(-c1 + d) / 2.0, (-c1 - d) / 2.0]
}

/// Dense polynomial product, coefficients in ascending powers.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
