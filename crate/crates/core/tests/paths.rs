use proptest::prelude::*;
use satvnf_core::topology::{Link, NetworkGraph, NodeId, Path, Resources, SatelliteNode};
use satvnf_core::PowerParams;

fn node(i: u32) -> SatelliteNode {
    SatelliteNode {
        id: NodeId(i),
        plane: 0,
        slot_in_plane: i,
        capacity: Resources::new(112.0, 192.0),
        power: PowerParams::REFERENCE,
    }
}

/// Every simple path from `s` to `t`, by depth-first enumeration.
fn all_simple_paths(g: &NetworkGraph, s: NodeId, t: NodeId) -> Vec<Path> {
    fn walk(g: &NetworkGraph, cur: Path, t: NodeId, out: &mut Vec<Path>) {
        let here = cur.target();
        if here == t {
            out.push(cur);
            return;
        }
        for &(next, link) in g.neighbors(here) {
            if cur.nodes.contains(&next) {
                continue;
            }
            let mut p = cur.clone();
            p.nodes.push(next);
            p.links.push(link);
            p.total_delay += g.link(link).delay;
            walk(g, p, t, out);
        }
    }
    let mut out = Vec::new();
    walk(g, Path::zero_hop(s), t, &mut out);
    out.sort_by(|a, b| a.rank_cmp(b));
    out
}

fn graph_strategy() -> impl Strategy<Value = NetworkGraph> {
    (2u32..=8).prop_flat_map(|n| {
        let pairs: Vec<(u32, u32)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let m = pairs.len();
        // small integer delays force plenty of ties
        (Just(n), Just(pairs), proptest::collection::vec(proptest::option::weighted(0.5, 1u32..=3), m))
            .prop_map(|(n, pairs, delays)| {
                let links = pairs
                    .iter()
                    .zip(delays)
                    .filter_map(|(&(a, b), d)| {
                        d.map(|d| Link { endpoints: (NodeId(a), NodeId(b)), bandwidth: 100.0, delay: d as f64, distance: 0.0 })
                    })
                    .collect();
                NetworkGraph::new((0..n).map(node).collect(), links).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn yen_matches_enumeration(g in graph_strategy(), s in 0u32..8, t in 0u32..8, d in 1usize..=6) {
        let n = g.node_count() as u32;
        let (s, t) = (NodeId(s % n), NodeId(t % n));
        prop_assume!(s != t);
        let expected = all_simple_paths(&g, s, t);
        match g.k_shortest_paths(s, t, d) {
            Ok(set) => {
                let want: Vec<_> = expected.iter().take(d).map(|p| (&p.nodes, &p.links)).collect();
                let got: Vec<_> = set.paths.iter().map(|p| (&p.nodes, &p.links)).collect();
                prop_assert_eq!(got, want);
                for (p, q) in set.paths.iter().zip(&expected) {
                    prop_assert_eq!(p.total_delay, q.total_delay);
                }
            }
            Err(_) => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn cache_agrees_with_direct_computation(g in graph_strategy(), d in 1usize..=4) {
        let mut warm = g.clone();
        warm.warm_path_cache(4);
        for s in g.node_ids() {
            for t in g.node_ids() {
                let cold = g.candidate_sd_paths(s, t, d).ok();
                let hot = warm.candidate_sd_paths(s, t, d).ok();
                prop_assert_eq!(cold, hot);
            }
        }
    }

    #[test]
    fn candidate_paths_start_and_end_right(g in graph_strategy(), s in 0u32..8, d in 1usize..=5) {
        let n = g.node_count() as u32;
        let s = NodeId(s % n);
        if let Ok(set) = g.candidate_sd_paths(s, s, d) {
            prop_assert_eq!(&set.paths[0], &Path::zero_hop(s));
            prop_assert!(set.paths.len() <= d);
            for p in &set.paths {
                prop_assert_eq!(p.source(), s);
                prop_assert_eq!(p.target(), s);
            }
            for w in set.paths.windows(2) {
                prop_assert!(w[0].total_delay <= w[1].total_delay);
            }
        }
    }
}

#[test]
fn torus_sizes() {
    let t = satvnf_core::topology::NodeTemplate { capacity: Resources::new(112.0, 192.0), power: PowerParams::REFERENCE };
    for (per, links) in [(2, 9), (3, 18), (4, 24), (5, 30)] {
        let g = NetworkGraph::build_constellation(3, per, 600.0, 400.0, t, 100.0).unwrap();
        assert_eq!(g.node_count() as u32, 3 * per);
        assert_eq!(g.link_count(), links);
    }
}
