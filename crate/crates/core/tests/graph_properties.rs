mod common;

use consensus_lab::graph::{build_laplacian, check_rooted, emit_graph, parse_graph, pin, Edge, GraphSpec};
use consensus_lab::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::random_rooted_graph;

fn graph_strategy() -> impl Strategy<Value = GraphSpec> {
    (any::<u64>(), 1usize..=12).prop_map(|(seed, n)| random_rooted_graph(&mut StdRng::seed_from_u64(seed), n))
}

proptest! {
    #[test]
    fn emit_parse_round_trip(g in graph_strategy()) {
        prop_assert_eq!(parse_graph(&emit_graph(&g)).unwrap(), g);
    }

    #[test]
    fn laplacian_rows_sum_to_zero(g in graph_strategy()) {
        let l = build_laplacian(&g);
        for row in l.row_iter() {
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!(row.sum().abs() <= 1e-12 * scale);
        }
        for (i, row) in l.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    prop_assert!(*v <= 0.0);
                }
            }
        }
    }

    #[test]
    fn rooted_graphs_steady_state_is_ones(g in graph_strategy()) {
        prop_assert!(check_rooted(&g).rooted);
        let p = pin(&g);
        let x = p.steady_state_direction().expect("K is invertible for rooted graphs");
        for v in x.iter() {
            prop_assert!((v - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn pinned_blocks_match_laplacian(g in graph_strategy()) {
        let l = build_laplacian(&g);
        let p = pin(&g);
        let order = p.node_order();
        for (r, &i) in order.iter().enumerate() {
            prop_assert_eq!(p.b()[r], -l[(i, g.source())]);
            for (c, &j) in order.iter().enumerate() {
                prop_assert_eq!(p.k()[(r, c)], l[(i, j)]);
            }
        }
    }

    #[test]
    fn removing_every_source_edge_unroots(g in graph_strategy()) {
        let cut = GraphSpec::new(
            g.node_count(),
            g.source(),
            g.edges().iter().copied().filter(|e| e.from != g.source()).collect(),
        )
        .unwrap();
        let r = check_rooted(&cut);
        prop_assert!(!r.rooted);
        prop_assert_eq!(r.unreachable.len(), g.agent_count());
        prop_assert!(matches!(r.into_result(), Err(Error::NotRooted(_))));
    }
}

#[test]
fn unreachable_subset_is_reported() {
    // source 3 feeds 1; 2 listens only to 4, which nobody feeds
    let g = GraphSpec::new(
        4,
        2,
        vec![
            Edge { from: 2, to: 0, weight: 1.0 },
            Edge { from: 3, to: 1, weight: 1.0 },
        ],
    )
    .unwrap();
    let r = check_rooted(&g);
    assert_eq!(r.unreachable_labels(), vec![2, 4]);
}

#[test]
fn error_messages_name_the_problem() {
    let e = parse_graph(r#"{"nodes": 3, "source": 3, "edges": [[3,1,1.0],[1,2,-2.0]]}"#).unwrap_err();
    assert_eq!(e.to_string(), "non-positive weight -2 on edge 1->2");
}
