//! Unbounded-beam placement against exhaustive enumeration on micro instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satvnf_core::costing::{self, check_feasibility, Occupancy, Scenario};
use satvnf_core::placement::{greedy_place, viterbi_place, PlacementConfig, UNBOUNDED_BEAM};
use satvnf_core::topology::NodeTemplate;
use satvnf_core::workload::{generate_requests, UniformRange};
use satvnf_core::*;

struct Micro {
    graph: NetworkGraph,
    ctx: SlotContext,
    requests: Vec<UserRequest>,
    profile: StrategyProfile,
    path: Path,
    config: PlacementConfig,
}

fn micro(seed: u64) -> Option<Micro> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = NodeTemplate { capacity: Resources::new(12.0, 24.0), power: PowerParams::REFERENCE };
    let mut graph = NetworkGraph::build_constellation(3, 2, 600.0, 400.0, t, 40.0).unwrap();
    graph.warm_path_cache(4);
    let states = (0..graph.node_count())
        .map(|_| match rng.gen_range(0..4) {
            0 => ServerState::on(),
            1 => ServerState::idle(0),
            2 => ServerState::unavailable_off(0),
            _ => ServerState::initially_off(),
        })
        .collect();
    let policy = if rng.gen_bool(0.5) { ChargePolicy::Once } else { ChargePolicy::PerVnf };
    let ctx = SlotContext::new(&graph, 0, states, &[], policy);
    let ranges = WorkloadRanges {
        vnf_count: UniformRange::new(1, 3),
        cpu: UniformRange::new(2, 8),
        ..WorkloadRanges::default()
    };
    let requests = generate_requests(3, &graph, &ranges, seed, 0).unwrap();
    let d = rng.gen_range(1..=2);
    let config = PlacementConfig { d, beam: UNBOUNDED_BEAM, weights: Weights::default() };
    let mut profile = StrategyProfile::empty_for(&requests);
    {
        let scen = Scenario::new(&graph, &ctx, &requests);
        for r in &requests[..2] {
            if let Some(s) = greedy_place(&scen, r, &profile, &config) {
                profile.insert(s);
            }
        }
    }
    let target = &requests[2];
    let paths = graph.candidate_slice(target.source, target.destination, d).ok()?;
    let path = paths[rng.gen_range(0..paths.len())].clone();
    let mut corridor = path.nodes.clone();
    corridor.sort();
    corridor.dedup();
    if corridor.len() > 4 {
        return None;
    }
    Some(Micro { graph, ctx, requests, profile, path, config })
}

/// Best payoff over every host assignment within the corridor and every route choice among
/// the `d` shortest, keeping only jointly feasible profiles.
fn exhaustive(m: &Micro) -> Option<f64> {
    let scen = Scenario::new(&m.graph, &m.ctx, &m.requests);
    let req = &m.requests[2];
    let mut corridor = m.path.nodes.clone();
    corridor.sort();
    corridor.dedup();
    let k = req.real_vnfs().len();
    let occ = Occupancy::build(&scen, &m.profile, Some(req.id));
    let mut best: Option<f64> = None;
    let host_combos = corridor.len().pow(k as u32);
    for code in 0..host_combos {
        let mut hosts = vec![req.source];
        let mut c = code;
        for _ in 0..k {
            hosts.push(corridor[c % corridor.len()]);
            c /= corridor.len();
        }
        hosts.push(req.destination);
        let options: Vec<Vec<Path>> = hosts
            .windows(2)
            .map(|w| m.graph.shortest_slice(w[0], w[1], m.config.d).map(|p| p.to_vec()).unwrap_or_default())
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let route_combos: usize = options.iter().map(Vec::len).product();
        for rc in 0..route_combos {
            let mut c = rc;
            let routes: Vec<Path> = options
                .iter()
                .map(|o| {
                    let p = o[c % o.len()].clone();
                    c /= o.len();
                    p
                })
                .collect();
            let mut s = Strategy { request_id: req.id, hosts: hosts.clone(), routes, allocated: true, cost: None };
            let mut joint = m.profile.clone();
            joint.insert(s.clone());
            if !check_feasibility(&joint, &scen).is_empty() {
                continue;
            }
            s.cost = Some(costing::evaluate(&s, req, &scen, &occ, &m.config.weights));
            let p = s.payoff();
            if best.map_or(true, |b| p > b) {
                best = Some(p);
            }
        }
    }
    best
}

#[test]
fn unbounded_beam_is_exhaustive() {
    let mut checked = 0;
    let mut allocated = 0;
    let mut seed = 0;
    while checked < 60 {
        seed += 1;
        let Some(m) = micro(seed) else { continue };
        let scen = Scenario::new(&m.graph, &m.ctx, &m.requests);
        let got = viterbi_place(&scen, &m.requests[2], &m.path, &m.profile, &m.config);
        let want = exhaustive(&m);
        match (&got, want) {
            (Some(s), Some(w)) => {
                assert!((s.payoff() - w).abs() <= 1e-12, "seed {seed}: {} vs {w}", s.payoff());
                let mut joint = m.profile.clone();
                joint.insert(s.clone());
                assert!(check_feasibility(&joint, &scen).is_empty(), "seed {seed}");
                allocated += 1;
            }
            (None, None) => {}
            _ => panic!("seed {seed}: viterbi {:?} vs exhaustive {want:?}", got.map(|s| s.payoff())),
        }
        checked += 1;
    }
    assert!(allocated >= 30, "only {allocated} feasible instances");
}
