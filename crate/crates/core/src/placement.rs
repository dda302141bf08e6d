//! Placing one request's chain onto the network.
//!
//! [`viterbi_place`] runs a stage-per-VNF beam search restricted to the nodes of one candidate
//! path (the corridor). A state is a placed prefix; its children place the next VNF on every
//! feasible corridor node, over every feasible route among the `d` shortest paths from the
//! previous host. After each stage the children are ranked by the prefix payoff and the best
//! `beam` survive. Prefixes that provably cannot be completed are dropped before ranking:
//! either the delay budget is out of reach, or the remaining VNFs do not fit on the corridor
//! nodes still reachable within it. With an unbounded beam the search is exhaustive.
//!
//! [`best_response`] takes the best of `viterbi_place` over the request's candidate paths.
//! [`greedy_place`] is the myopic baseline.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::costing::{self, Occupancy, Scenario, Strategy, StrategyProfile, Weights, FEASIBILITY_TOL};
use crate::energymodel::ServerMode;
use crate::topology::{NetworkGraph, NodeId, Path, Resources};
use crate::workload::UserRequest;

/// Beam width meaning "keep every state".
pub const UNBOUNDED_BEAM: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    /// Candidate paths per request, and routes per chain edge.
    pub d: usize,
    /// States kept per stage.
    pub beam: usize,
    pub weights: Weights,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { d: 8, beam: 4, weights: Weights::default() }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.d == 0 || self.beam == 0 {
            return Err(crate::Error::InvalidParameter("d and beam must be >= 1"));
        }
        self.weights.validate()
    }
}

/// Placed prefix of a chain with its accumulated cost numerators.
#[derive(Clone, Debug)]
struct BeamState {
    hosts: Vec<NodeId>,
    routes: Vec<Path>,
    /// Sum of bandwidth x hops (Mbps).
    bw_units: f64,
    watts: f64,
    delay_ms: f64,
    hops: usize,
    /// Own node usage on top of the occupancy.
    node_used: Vec<Resources>,
    /// Own link usage on top of the occupancy.
    link_used: Vec<f64>,
    payoff: f64,
}

impl BeamState {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .payoff
            .total_cmp(&self.payoff)
            .then_with(|| self.hops.cmp(&other.hops))
            .then_with(|| self.hosts.cmp(&other.hosts))
            .then_with(|| self.routes.iter().map(|r| &r.nodes).cmp(other.routes.iter().map(|r| &r.nodes)))
    }
}

/// Normalizers and bounds shared by every state of one search.
struct Search<'a> {
    scenario: &'a Scenario<'a>,
    request: &'a UserRequest,
    occ: &'a Occupancy,
    config: &'a PlacementConfig,
    total_bw: f64,
    total_power: f64,
    /// Execution time of the VNFs after stage `i` (index `i`).
    exec_after: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(scenario: &'a Scenario<'a>, request: &'a UserRequest, occ: &'a Occupancy, config: &'a PlacementConfig) -> Self {
        let mut exec_after = vec![0.0; request.vnfs.len()];
        for i in (0..request.vnfs.len().saturating_sub(1)).rev() {
            exec_after[i] = exec_after[i + 1] + request.vnfs[i + 1].exec_time;
        }
        Self {
            scenario,
            request,
            occ,
            config,
            total_bw: scenario.graph.total_bandwidth(),
            total_power: scenario.graph.total_max_power(),
            exec_after,
        }
    }

    fn graph(&self) -> &'a NetworkGraph {
        self.scenario.graph
    }

    fn root(&self) -> BeamState {
        let g = self.graph();
        let mut s = BeamState {
            hosts: vec![self.request.source],
            routes: Vec::new(),
            bw_units: 0.0,
            watts: 0.0,
            delay_ms: 0.0,
            hops: 0,
            node_used: vec![Resources::ZERO; g.node_count()],
            link_used: vec![0.0; g.link_count()],
            payoff: 0.0,
        };
        s.payoff = self.payoff(&s);
        s
    }

    fn payoff(&self, s: &BeamState) -> f64 {
        let ratio = |x: f64, total: f64| if x == 0.0 { 0.0 } else { x / total };
        self.config.weights.payoff(
            ratio(s.bw_units, self.total_bw),
            ratio(s.watts, self.total_power),
            ratio(s.delay_ms, self.request.max_delay),
        )
    }

    /// Whether the VNF at `stage` fits on `node` on top of the state's own usage.
    fn node_fits(&self, s: &BeamState, stage: usize, node: NodeId) -> bool {
        let vnf = &self.request.vnfs[stage];
        if vnf.is_pseudo {
            return true;
        }
        let ctx = self.scenario.ctx;
        if ctx.modes[node.index()] == ServerMode::UnavailableOff {
            return false;
        }
        let cap = self.graph().node(node).capacity;
        let i = node.index();
        let used = self.occ.node_used[i];
        let own = s.node_used[i];
        used.cpu + own.cpu + vnf.cpu <= cap.cpu + FEASIBILITY_TOL
            && used.memory + own.memory + vnf.memory <= cap.memory + FEASIBILITY_TOL
    }

    fn route_fits(&self, s: &BeamState, stage: usize, route: &Path) -> bool {
        let bw = self.request.edges[stage - 1].bandwidth;
        route.links.iter().all(|l| {
            let i = l.index();
            self.occ.link_used[i] + s.link_used[i] + bw <= self.graph().link(*l).bandwidth + FEASIBILITY_TOL
        })
    }

    /// Delay so far plus admissible lower bounds on what is still to come: the remaining
    /// execution time and the shortest delay from `node` to the destination.
    fn delay_fits(&self, delay_ms: f64, stage: usize, node: NodeId) -> bool {
        let to_dest = if node == self.request.destination {
            0.0
        } else {
            match self.graph().shortest_slice(node, self.request.destination, 1) {
                Ok(p) if !p.is_empty() => p[0].total_delay,
                _ => return false,
            }
        };
        delay_ms + self.exec_after[stage] + to_dest <= self.request.max_delay + FEASIBILITY_TOL
    }

    fn child(&self, s: &BeamState, stage: usize, node: NodeId, route: &Path) -> BeamState {
        let vnf = &self.request.vnfs[stage];
        let bw = self.request.edges[stage - 1].bandwidth;
        let mut c = s.clone();
        if !vnf.is_pseudo {
            let self_charged = s.hosts[1..].contains(&node);
            c.watts += self.occ.vnf_power(self.graph(), self.scenario.ctx, node, vnf, self_charged);
            let u = &mut c.node_used[node.index()];
            u.cpu += vnf.cpu;
            u.memory += vnf.memory;
        }
        for l in &route.links {
            c.link_used[l.index()] += bw;
        }
        c.bw_units += bw * route.hop_count() as f64;
        c.delay_ms += vnf.exec_time + route.total_delay;
        c.hops += route.hop_count();
        c.hosts.push(node);
        c.routes.push(route.clone());
        c.payoff = self.payoff(&c);
        c
    }

    fn expand(&self, beam: &[BeamState], stage: usize, hosts: &[NodeId], ahead: Option<&Lookahead>) -> Vec<BeamState> {
        let mut children = Vec::new();
        for s in beam {
            let prev = *s.hosts.last().expect("root holds the source");
            for &node in hosts {
                if !self.node_fits(s, stage, node) {
                    continue;
                }
                let Ok(routes) = self.graph().shortest_slice(prev, node, self.config.d) else {
                    continue;
                };
                for route in routes.iter() {
                    let delay = s.delay_ms + self.request.vnfs[stage].exec_time + route.total_delay;
                    if self.route_fits(s, stage, route) && self.delay_fits(delay, stage, node) {
                        let c = self.child(s, stage, node, route);
                        if ahead.map_or(true, |a| a.completable(self, &c, stage)) {
                            children.push(c);
                        }
                    }
                }
            }
        }
        children
    }

    fn finish(&self, s: BeamState) -> Strategy {
        let mut strategy = Strategy {
            request_id: self.request.id,
            hosts: s.hosts,
            routes: s.routes,
            allocated: true,
            cost: None,
        };
        strategy.cost = Some(costing::evaluate(&strategy, self.request, self.scenario, self.occ, &self.config.weights));
        strategy
    }
}

/// Necessary condition for completing a prefix: the VNFs still to place must fit, in total,
/// on the corridor nodes reachable within the remaining delay slack.
struct Lookahead {
    nodes: Vec<NodeId>,
    /// Shortest delay between corridor nodes, row-major.
    dist: Vec<f64>,
    to_dest: Vec<f64>,
    /// Cpu and memory of the real VNFs after stage `i`.
    demand_after: Vec<Resources>,
}

impl Lookahead {
    fn new(graph: &NetworkGraph, request: &UserRequest, nodes: Vec<NodeId>) -> Self {
        let delay = |a: NodeId, b: NodeId| match graph.shortest_slice(a, b, 1) {
            _ if a == b => 0.0,
            Ok(p) if !p.is_empty() => p[0].total_delay,
            _ => f64::INFINITY,
        };
        let dist = nodes.iter().flat_map(|&a| nodes.iter().map(move |&b| delay(a, b))).collect();
        let to_dest = nodes.iter().map(|&a| delay(a, request.destination)).collect();
        let n = request.vnfs.len();
        let mut demand_after = vec![Resources::ZERO; n];
        for i in (0..n.saturating_sub(1)).rev() {
            let v = &request.vnfs[i + 1];
            demand_after[i] = Resources::new(demand_after[i + 1].cpu + v.cpu, demand_after[i + 1].memory + v.memory);
        }
        Self { nodes, dist, to_dest, demand_after }
    }

    fn completable(&self, search: &Search<'_>, s: &BeamState, stage: usize) -> bool {
        let need = self.demand_after[stage];
        if need.cpu == 0.0 && need.memory == 0.0 {
            return true;
        }
        let Some(here) = self.nodes.iter().position(|&n| n == *s.hosts.last().expect("placed")) else {
            return true;
        };
        let slack = search.request.max_delay - s.delay_ms - search.exec_after[stage] + FEASIBILITY_TOL;
        let k = self.nodes.len();
        let mut free = Resources::ZERO;
        for (j, &w) in self.nodes.iter().enumerate() {
            if self.dist[here * k + j] + self.to_dest[j] > slack
                || search.scenario.ctx.modes[w.index()] == ServerMode::UnavailableOff
            {
                continue;
            }
            let cap = search.graph().node(w).capacity;
            let (used, own) = (search.occ.node_used[w.index()], s.node_used[w.index()]);
            free.cpu += (cap.cpu - used.cpu - own.cpu).max(0.0);
            free.memory += (cap.memory - used.memory - own.memory).max(0.0);
        }
        need.cpu <= free.cpu + FEASIBILITY_TOL && need.memory <= free.memory + FEASIBILITY_TOL
    }
}

/// Distinct nodes of `path`, ascending.
fn corridor(path: &Path) -> Vec<NodeId> {
    let mut nodes = path.nodes.clone();
    nodes.sort();
    nodes.dedup();
    nodes
}

/// Beam-searched placement of `request` within the corridor of `path`, against a fixed
/// occupancy. `None` if every beam state dies.
pub fn viterbi_with(
    scenario: &Scenario<'_>,
    request: &UserRequest,
    path: &Path,
    occ: &Occupancy,
    config: &PlacementConfig,
) -> Option<Strategy> {
    if path.source() != request.source || path.target() != request.destination {
        return None;
    }
    let search = Search::new(scenario, request, occ, config);
    let omega = corridor(path);
    let ahead = Lookahead::new(scenario.graph, request, omega.clone());
    let last = request.vnfs.len() - 1;
    let mut beam = vec![search.root()];
    for stage in 1..=last {
        let dest = [request.destination];
        let hosts: &[NodeId] = if stage == last { &dest } else { &omega };
        let mut children = search.expand(&beam, stage, hosts, Some(&ahead));
        if children.is_empty() {
            return None;
        }
        children.sort_by(BeamState::rank_cmp);
        children.truncate(config.beam);
        beam = children;
    }
    beam.into_iter().next().map(|s| search.finish(s))
}

/// [`viterbi_with`] against the occupancy left by every other strategy in `others`.
pub fn viterbi_place(
    scenario: &Scenario<'_>,
    request: &UserRequest,
    path: &Path,
    others: &StrategyProfile,
    config: &PlacementConfig,
) -> Option<Strategy> {
    let occ = Occupancy::build(scenario, others, Some(request.id));
    viterbi_with(scenario, request, path, &occ, config)
}

/// Strategy order used to pick among candidates: payoff (higher first), fewer hops, then
/// lexicographic hosts.
pub fn strategy_cmp(a: &Strategy, b: &Strategy) -> Ordering {
    b.payoff()
        .total_cmp(&a.payoff())
        .then_with(|| a.total_hops().cmp(&b.total_hops()))
        .then_with(|| a.hosts.cmp(&b.hosts))
}

/// Best placement of `request` over its candidate paths with every other strategy of
/// `profile` fixed. `None` leaves the request unallocated.
pub fn best_response(
    scenario: &Scenario<'_>,
    request: &UserRequest,
    profile: &StrategyProfile,
    config: &PlacementConfig,
) -> Option<Strategy> {
    let occ = Occupancy::build(scenario, profile, Some(request.id));
    let paths = scenario
        .graph
        .candidate_slice(request.source, request.destination, config.d)
        .ok()?;
    paths
        .iter()
        .filter_map(|p| viterbi_with(scenario, request, p, &occ, config))
        .min_by(strategy_cmp)
}

/// Myopic baseline: each VNF goes to the node of the candidate corridors with the smallest
/// weighted cost increment over the shortest route from the previous host (ties to the lower
/// node id). No backtracking.
pub fn greedy_place(
    scenario: &Scenario<'_>,
    request: &UserRequest,
    profile: &StrategyProfile,
    config: &PlacementConfig,
) -> Option<Strategy> {
    let occ = Occupancy::build(scenario, profile, Some(request.id));
    let paths = scenario
        .graph
        .candidate_slice(request.source, request.destination, config.d)
        .ok()?;
    let mut nodes: Vec<NodeId> = paths.iter().flat_map(|p| p.nodes.iter().copied()).collect();
    nodes.sort();
    nodes.dedup();

    let search = Search::new(scenario, request, &occ, config);
    let last = request.vnfs.len() - 1;
    let mut state = search.root();
    for stage in 1..=last {
        let dest = [request.destination];
        let hosts: &[NodeId] = if stage == last { &dest } else { &nodes };
        let prev = *state.hosts.last().expect("root holds the source");
        let mut best: Option<(f64, BeamState)> = None;
        for &node in hosts {
            if !search.node_fits(&state, stage, node) {
                continue;
            }
            let Ok(routes) = scenario.graph.shortest_slice(prev, node, 1) else { continue };
            let Some(route) = routes.first() else { continue };
            let delay = state.delay_ms + request.vnfs[stage].exec_time + route.total_delay;
            if !search.route_fits(&state, stage, route) || !search.delay_fits(delay, stage, node) {
                continue;
            }
            let child = search.child(&state, stage, node, route);
            // payoff drop of this step = weighted cost increment
            let increment = state.payoff - child.payoff;
            if best.as_ref().map_or(true, |(b, _)| increment < *b) {
                best = Some((increment, child));
            }
        }
        state = best?.1;
    }
    Some(search.finish(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costing::SlotContext;
    use crate::energymodel::{ChargePolicy, PowerParams, ServerState};
    use crate::topology::{Link, SatelliteNode};
    use crate::workload::{RequestId, VnfSpec};

    fn node(i: u32, cpu: f64) -> SatelliteNode {
        SatelliteNode {
            id: NodeId(i),
            plane: 0,
            slot_in_plane: i,
            capacity: Resources::new(cpu, 192.0),
            power: PowerParams::REFERENCE,
        }
    }

    fn link(a: u32, b: u32, delay: f64) -> Link {
        Link { endpoints: (NodeId(a), NodeId(b)), bandwidth: 100.0, delay, distance: 0.0 }
    }

    fn cfg(d: usize, beam: usize) -> PlacementConfig {
        PlacementConfig { d, beam, weights: Weights::default() }
    }

    #[test]
    fn pseudo_only_chain_is_free() {
        let g = NetworkGraph::new(vec![node(0, 112.0)], vec![]).unwrap();
        let ctx = SlotContext::initial(&g, ServerState::initially_off(), ChargePolicy::Once);
        let req = UserRequest::chain(RequestId(0), NodeId(0), NodeId(0), &[], &[10.0], 0.0, 0, 1).unwrap();
        let reqs = [req];
        let scen = Scenario::new(&g, &ctx, &reqs);
        let path = Path::zero_hop(NodeId(0));
        let s = viterbi_place(&scen, &reqs[0], &path, &StrategyProfile::new(), &cfg(1, 1)).unwrap();
        assert_eq!(s.payoff(), 1.0);
        assert_eq!(s.routes, vec![Path::zero_hop(NodeId(0))]);
    }

    #[test]
    fn full_source_pushes_vnf_to_neighbor() {
        // Sat8 (id 7) full, Sat5 (id 4) free: f(2,1) lands on Sat5 with route 8 -> 5 -> 8.
        let mut nodes: Vec<_> = (0..9).map(|i| node(i, 112.0)).collect();
        nodes[7].capacity.cpu = 2.0;
        let g = NetworkGraph::new(nodes, vec![link(7, 4, 2.0), link(4, 1, 2.0), link(7, 6, 3.0)]).unwrap();
        let ctx = SlotContext::initial(&g, ServerState::idle(0), ChargePolicy::Once);
        let req = UserRequest::chain(
            RequestId(0),
            NodeId(7),
            NodeId(7),
            &[VnfSpec::new(4.0, 4.0, 10.0)],
            &[10.0, 10.0],
            20.0,
            0,
            1,
        )
        .unwrap();
        let reqs = [req];
        let scen = Scenario::new(&g, &ctx, &reqs);
        let corridor = g.candidate_sd_paths(NodeId(7), NodeId(7), 2).unwrap().paths[1].clone();
        assert_eq!(corridor.nodes, vec![NodeId(7), NodeId(4), NodeId(7)]);
        let s = viterbi_place(&scen, &reqs[0], &corridor, &StrategyProfile::new(), &cfg(2, 4)).unwrap();
        assert_eq!(s.hosts, vec![NodeId(7), NodeId(4), NodeId(7)]);
        let walk: Vec<_> = s.routes.iter().flat_map(|r| r.nodes.clone()).collect();
        assert_eq!(walk, vec![NodeId(7), NodeId(4), NodeId(4), NodeId(7)]);
    }

    #[test]
    fn saturated_network_gives_none() {
        let g = NetworkGraph::new(vec![node(0, 2.0), node(1, 2.0)], vec![link(0, 1, 1.0)]).unwrap();
        let ctx = SlotContext::initial(&g, ServerState::idle(0), ChargePolicy::Once);
        let req = UserRequest::chain(
            RequestId(0),
            NodeId(0),
            NodeId(1),
            &[VnfSpec::new(4.0, 4.0, 10.0)],
            &[10.0, 10.0],
            100.0,
            0,
            1,
        )
        .unwrap();
        let reqs = [req];
        let scen = Scenario::new(&g, &ctx, &reqs);
        assert!(best_response(&scen, &reqs[0], &StrategyProfile::new(), &cfg(2, 4)).is_none());
        assert!(greedy_place(&scen, &reqs[0], &StrategyProfile::new(), &cfg(2, 4)).is_none());
    }

    #[test]
    fn greedy_breaks_ties_by_node_id() {
        // Triangle with equal delays: source 1, destination 1. All nodes idle and equal, so the
        // VNF stays on the source (no transmission) unless ties; check the co-located choice.
        let g = NetworkGraph::new(
            vec![node(0, 112.0), node(1, 112.0), node(2, 112.0)],
            vec![link(0, 1, 1.0), link(1, 2, 1.0), link(0, 2, 1.0)],
        )
        .unwrap();
        let ctx = SlotContext::initial(&g, ServerState::idle(0), ChargePolicy::Once);
        let req = UserRequest::chain(
            RequestId(0),
            NodeId(0),
            NodeId(1),
            &[VnfSpec::new(4.0, 4.0, 10.0)],
            &[10.0, 10.0],
            100.0,
            0,
            1,
        )
        .unwrap();
        let reqs = [req];
        let scen = Scenario::new(&g, &ctx, &reqs);
        // Nodes 0 and 1 cost the same (one hop either before or after the VNF).
        let s = greedy_place(&scen, &reqs[0], &StrategyProfile::new(), &cfg(1, 1)).unwrap();
        assert_eq!(s.hosts, vec![NodeId(0), NodeId(0), NodeId(1)]);
    }

    #[test]
    fn d1_best_response_equals_single_path_viterbi() {
        let t = crate::topology::NodeTemplate { capacity: Resources::new(112.0, 192.0), power: PowerParams::REFERENCE };
        let mut g = NetworkGraph::build_constellation(3, 2, 600.0, 400.0, t, 100.0).unwrap();
        g.warm_path_cache(8);
        let ctx = SlotContext::initial(&g, ServerState::initially_off(), ChargePolicy::Once);
        let reqs = crate::workload::generate_requests(5, &g, &Default::default(), 3, 0).unwrap();
        let scen = Scenario::new(&g, &ctx, &reqs);
        for r in &reqs {
            let path = g.candidate_sd_paths(r.source, r.destination, 1).unwrap().paths[0].clone();
            let a = best_response(&scen, r, &StrategyProfile::new(), &cfg(1, 4));
            let b = viterbi_place(&scen, r, &path, &StrategyProfile::new(), &cfg(1, 4));
            assert_eq!(a, b);
        }
    }
}
