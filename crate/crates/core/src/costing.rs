//! Normalized deployment costs, user and network payoffs, and the constraint system.
//!
//! Costs of one request are evaluated against an [`Occupancy`]: what earlier slots and the
//! other requests of the current slot already hold. A strategy stores the [`CostBreakdown`]
//! it was committed with; [`network_payoff`] sums those stored payoffs, so a unilateral
//! change of one strategy changes the network payoff by exactly that request's payoff change.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::energymodel::{vnf_power_attribution, AttributionContext, ChargePolicy, ServerMode, ServerState};
use crate::topology::{LinkId, NetworkGraph, NodeId, Path, Resources};
use crate::workload::{RequestId, UserRequest};
use crate::{Error, Result};

/// Slack allowed on capacity and delay comparisons.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub bw: f64,
    pub power: f64,
    pub delay: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { bw: 1.0 / 3.0, power: 1.0 / 3.0, delay: 1.0 / 3.0 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.bw, self.power, self.delay];
        if all.iter().any(|w| !(*w >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("weights must be non-negative and sum to 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn payoff(&self, bw: f64, power: f64, delay: f64) -> f64 {
        1.0 - self.bw * bw - self.power * power - self.delay * delay
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub bw: f64,
    pub power: f64,
    pub delay: f64,
    pub payoff: f64,
}

impl CostBreakdown {
    pub fn new(bw: f64, power: f64, delay: f64, weights: &Weights) -> Self {
        Self { bw, power, delay, payoff: weights.payoff(bw, power, delay) }
    }
}

/// One request's placement decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub request_id: RequestId,
    /// Host of every VNF, pseudo endpoints included.
    pub hosts: Vec<NodeId>,
    /// Route of every chain edge.
    pub routes: Vec<Path>,
    pub allocated: bool,
    pub cost: Option<CostBreakdown>,
}

impl Strategy {
    pub fn unallocated(request_id: RequestId) -> Self {
        Self { request_id, hosts: Vec::new(), routes: Vec::new(), allocated: false, cost: None }
    }

    /// Stored payoff; 0 when unallocated.
    pub fn payoff(&self) -> f64 {
        match (self.allocated, self.cost) {
            (true, Some(c)) => c.payoff,
            _ => 0.0,
        }
    }

    pub fn total_hops(&self) -> usize {
        self.routes.iter().map(Path::hop_count).sum()
    }

    /// Same hosts and routes, regardless of stored cost.
    pub fn same_decision(&self, other: &Strategy) -> bool {
        self.allocated == other.allocated
            && self.hosts == other.hosts
            && self.routes.iter().map(|r| &r.nodes).eq(other.routes.iter().map(|r| &r.nodes))
    }
}

/// Joint strategies of the requests of one slot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub strategies: BTreeMap<RequestId, Strategy>,
}

impl StrategyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// All requests unallocated.
    pub fn empty_for(requests: &[UserRequest]) -> Self {
        Self {
            strategies: requests.iter().map(|r| (r.id, Strategy::unallocated(r.id))).collect(),
        }
    }

    pub fn insert(&mut self, s: Strategy) -> Option<Strategy> {
        self.strategies.insert(s.request_id, s)
    }

    pub fn get(&self, id: RequestId) -> Option<&Strategy> {
        self.strategies.get(&id)
    }

    pub fn allocated(&self) -> impl Iterator<Item = &Strategy> {
        self.strategies.values().filter(|s| s.allocated)
    }

    pub fn allocated_count(&self) -> usize {
        self.allocated().count()
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }
}

/// Resources and server states fixed for the whole slot: server modes as seen at placement
/// time and everything held by requests committed in earlier slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotContext {
    pub slot: u32,
    /// Per node, the mode a placement sees.
    pub modes: Vec<ServerMode>,
    /// Per node, a request committed earlier is still running there next slot.
    pub prior_serves_next: Vec<bool>,
    pub prior_usage: Vec<Resources>,
    /// Per link, Mbps held by earlier requests.
    pub prior_link_usage: Vec<f64>,
    /// Per node, the server state at the end of the previous slot.
    pub server_states: Vec<ServerState>,
    pub charge_policy: ChargePolicy,
}

impl SlotContext {
    /// Context for `slot` given the previous server states and the requests committed in
    /// earlier slots that still hold resources at `slot`.
    pub fn new(
        graph: &NetworkGraph,
        slot: u32,
        server_states: Vec<ServerState>,
        committed: &[(&UserRequest, &Strategy)],
        charge_policy: ChargePolicy,
    ) -> Self {
        let n = graph.node_count();
        let mut occupied = vec![false; n];
        let mut prior_serves_next = vec![false; n];
        let mut prior_usage = vec![Resources::ZERO; n];
        let mut prior_link_usage = vec![0.0; graph.link_count()];
        for (req, s) in committed {
            if !s.allocated || req.last_slot() < slot {
                continue;
            }
            for (vnf, host) in req.vnfs.iter().zip(&s.hosts) {
                if vnf.is_pseudo {
                    continue;
                }
                let u = &mut prior_usage[host.index()];
                u.cpu += vnf.cpu;
                u.memory += vnf.memory;
                occupied[host.index()] = true;
                if req.last_slot() > slot {
                    prior_serves_next[host.index()] = true;
                }
            }
            for (edge, route) in req.edges.iter().zip(&s.routes) {
                for l in &route.links {
                    prior_link_usage[l.index()] += edge.bandwidth;
                }
            }
        }
        let modes = graph
            .nodes()
            .iter()
            .zip(&server_states)
            .zip(&occupied)
            .map(|((node, st), &occ)| st.placement_mode(&node.power, slot, occ))
            .collect();
        Self { slot, modes, prior_serves_next, prior_usage, prior_link_usage, server_states, charge_policy }
    }

    /// Slot 0 with every server in `initial` state and nothing committed.
    pub fn initial(graph: &NetworkGraph, initial: ServerState, charge_policy: ChargePolicy) -> Self {
        Self::new(graph, 0, vec![initial; graph.node_count()], &[], charge_policy)
    }
}

/// A slot's problem: graph, fixed context and the requests competing in it.
#[derive(Clone, Copy, Debug)]
pub struct Scenario<'a> {
    pub graph: &'a NetworkGraph,
    pub ctx: &'a SlotContext,
    pub requests: &'a [UserRequest],
}

impl<'a> Scenario<'a> {
    pub fn new(graph: &'a NetworkGraph, ctx: &'a SlotContext, requests: &'a [UserRequest]) -> Self {
        Self { graph, ctx, requests }
    }

    pub fn request(&self, id: RequestId) -> Option<&'a UserRequest> {
        self.requests.iter().find(|r| r.id == id)
    }
}

/// Everything held on nodes and links from one request's point of view: earlier slots plus
/// the other allocated strategies of the profile.
///
/// Among requests of the same slot, a server's base charge is paid by the lowest request id
/// placed there, and only lower ids count as keeping the server busy next slot. Every
/// shared server therefore has exactly one payer.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    pub node_used: Vec<Resources>,
    pub link_used: Vec<f64>,
    /// Base charge (setup or idle power) of the server is already paid this slot.
    pub base_charged: Vec<bool>,
    pub serves_next: Vec<bool>,
}

impl Occupancy {
    /// Occupancy seen by `me`; `None` gives the full-profile occupancy.
    pub fn build(scenario: &Scenario<'_>, profile: &StrategyProfile, me: Option<RequestId>) -> Self {
        let ctx = scenario.ctx;
        let mut occ = Occupancy {
            node_used: ctx.prior_usage.clone(),
            link_used: ctx.prior_link_usage.clone(),
            base_charged: vec![false; scenario.graph.node_count()],
            serves_next: ctx.prior_serves_next.clone(),
        };
        for s in profile.allocated() {
            if Some(s.request_id) == me {
                continue;
            }
            let Some(req) = scenario.request(s.request_id) else { continue };
            occ.add(req, s, me.is_some_and(|me| s.request_id < me));
        }
        occ
    }

    fn add(&mut self, req: &UserRequest, s: &Strategy, earlier: bool) {
        for (vnf, host) in req.vnfs.iter().zip(&s.hosts) {
            if vnf.is_pseudo {
                continue;
            }
            let i = host.index();
            self.node_used[i].cpu += vnf.cpu;
            self.node_used[i].memory += vnf.memory;
            if earlier {
                self.base_charged[i] = true;
                if req.duration_slots >= 2 {
                    self.serves_next[i] = true;
                }
            }
        }
        for (edge, route) in req.edges.iter().zip(&s.routes) {
            for l in &route.links {
                self.link_used[l.index()] += edge.bandwidth;
            }
        }
    }

    /// Power (W) attributed to placing a real VNF on `node`. `self_charged` is set when an
    /// earlier VNF of the same request already sits on `node`.
    pub fn vnf_power(
        &self,
        graph: &NetworkGraph,
        ctx: &SlotContext,
        node: NodeId,
        vnf: &crate::workload::VnfSpec,
        self_charged: bool,
    ) -> f64 {
        let i = node.index();
        let n = graph.node(node);
        let base_charged = match ctx.charge_policy {
            ChargePolicy::Once => self_charged || self.base_charged[i],
            ChargePolicy::PerVnf => false,
        };
        let actx = AttributionContext {
            mode: ctx.modes[i],
            serves_next: self.serves_next[i],
            capacity_cpu: n.capacity.cpu,
        };
        vnf_power_attribution(&actx, vnf, &n.power, base_charged)
    }
}

/// Sum over chain edges of bandwidth times route hop count, normalized by total link
/// bandwidth.
pub fn bandwidth_cost(strategy: &Strategy, request: &UserRequest, graph: &NetworkGraph) -> f64 {
    if !strategy.allocated {
        return 0.0;
    }
    let used: f64 = request
        .edges
        .iter()
        .zip(&strategy.routes)
        .map(|(e, r)| e.bandwidth * r.hop_count() as f64)
        .sum();
    if used == 0.0 {
        0.0
    } else {
        used / graph.total_bandwidth()
    }
}

/// Attributed power of the request's VNFs, normalized by the summed server maximum power.
pub fn energy_cost(
    strategy: &Strategy,
    request: &UserRequest,
    graph: &NetworkGraph,
    ctx: &SlotContext,
    occ: &Occupancy,
) -> f64 {
    if !strategy.allocated {
        return 0.0;
    }
    let mut placed: Vec<NodeId> = Vec::new();
    let mut watts = 0.0;
    for (vnf, &host) in request.vnfs.iter().zip(&strategy.hosts) {
        if vnf.is_pseudo {
            continue;
        }
        watts += occ.vnf_power(graph, ctx, host, vnf, placed.contains(&host));
        placed.push(host);
    }
    watts / graph.total_max_power()
}

/// Execution plus transmission delay, normalized by the request's delay budget.
pub fn delay_cost(strategy: &Strategy, request: &UserRequest) -> f64 {
    if !strategy.allocated {
        return 0.0;
    }
    let total = service_delay(strategy, request);
    if total == 0.0 {
        0.0
    } else {
        total / request.max_delay
    }
}

/// Execution plus transmission delay in ms.
pub fn service_delay(strategy: &Strategy, request: &UserRequest) -> f64 {
    request.exec_time_total() + strategy.routes.iter().map(|r| r.total_delay).sum::<f64>()
}

/// Evaluates all cost components of an allocated strategy.
pub fn evaluate(
    strategy: &Strategy,
    request: &UserRequest,
    scenario: &Scenario<'_>,
    occ: &Occupancy,
    weights: &Weights,
) -> CostBreakdown {
    CostBreakdown::new(
        bandwidth_cost(strategy, request, scenario.graph),
        energy_cost(strategy, request, scenario.graph, scenario.ctx, occ),
        delay_cost(strategy, request),
        weights,
    )
}

/// Payoff from the stored cost components: `(1 - a1 bw - a2 power - a3 delay) * z`.
pub fn user_payoff(strategy: &Strategy, weights: &Weights) -> f64 {
    match (strategy.allocated, strategy.cost) {
        (true, Some(c)) => weights.payoff(c.bw, c.power, c.delay),
        _ => 0.0,
    }
}

pub fn network_payoff(profile: &StrategyProfile, weights: &Weights) -> f64 {
    profile.strategies.values().map(|s| user_payoff(s, weights)).sum()
}

/// Re-evaluates every stored cost against the current profile.
pub fn reevaluate_all(profile: &mut StrategyProfile, scenario: &Scenario<'_>, weights: &Weights) {
    let snapshot = profile.clone();
    for s in profile.strategies.values_mut() {
        if !s.allocated {
            continue;
        }
        let Some(req) = scenario.request(s.request_id) else { continue };
        let occ = Occupancy::build(scenario, &snapshot, Some(s.request_id));
        s.cost = Some(evaluate(s, req, scenario, &occ, weights));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Cpu,
    Memory,
}

/// A violated constraint and the entity it concerns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Each VNF on exactly one existing node, endpoints pinned.
    Placement { request: RequestId, reason: &'static str },
    /// Exactly one valid route per chain edge joining its hosts.
    PathSelection { request: RequestId, edge: usize, reason: &'static str },
    NodeCapacity { node: NodeId, resource: ResourceKind, used: f64, capacity: f64 },
    LinkCapacity { link: LinkId, used: f64, capacity: f64 },
    Delay { request: RequestId, total: f64, budget: f64 },
    IdleTime { node: NodeId, gap: u32, limit: u32 },
    OffTime { node: NodeId, gap: u32, limit: u32 },
}

/// Every violated constraint of the profile together with the slot context. Empty means
/// feasible.
pub fn check_feasibility(profile: &StrategyProfile, scenario: &Scenario<'_>) -> Vec<Violation> {
    let graph = scenario.graph;
    let ctx = scenario.ctx;
    let mut out = Vec::new();

    for s in profile.strategies.values() {
        let Some(req) = scenario.request(s.request_id) else {
            out.push(Violation::Placement { request: s.request_id, reason: "unknown request" });
            continue;
        };
        if !s.allocated {
            if !s.hosts.is_empty() || !s.routes.is_empty() {
                out.push(Violation::Placement { request: req.id, reason: "unallocated strategy holds placements" });
            }
            continue;
        }
        check_structure(s, req, graph, ctx, &mut out);
    }

    let occ = Occupancy::build(scenario, profile, None);
    for node in graph.nodes() {
        let used = occ.node_used[node.id.index()];
        for (kind, used, cap) in [
            (ResourceKind::Cpu, used.cpu, node.capacity.cpu),
            (ResourceKind::Memory, used.memory, node.capacity.memory),
        ] {
            if used > cap + FEASIBILITY_TOL {
                out.push(Violation::NodeCapacity { node: node.id, resource: kind, used, capacity: cap });
            }
        }
    }
    for (i, link) in graph.links().iter().enumerate() {
        let used = occ.link_used[i];
        if used > link.bandwidth + FEASIBILITY_TOL {
            out.push(Violation::LinkCapacity { link: LinkId(i as u32), used, capacity: link.bandwidth });
        }
    }
    audit_server_states(scenario, &mut out);
    out
}

fn check_structure(s: &Strategy, req: &UserRequest, graph: &NetworkGraph, ctx: &SlotContext, out: &mut Vec<Violation>) {
    let id = req.id;
    if s.hosts.len() != req.vnfs.len() {
        out.push(Violation::Placement { request: id, reason: "one host per VNF required" });
        return;
    }
    if s.hosts.iter().any(|h| !graph.contains(*h)) {
        out.push(Violation::Placement { request: id, reason: "host is not a node of the graph" });
        return;
    }
    if s.hosts[0] != req.source || s.hosts[s.hosts.len() - 1] != req.destination {
        out.push(Violation::Placement { request: id, reason: "endpoints must sit on source and destination" });
    }
    for (vnf, host) in req.vnfs.iter().zip(&s.hosts) {
        if !vnf.is_pseudo && ctx.modes[host.index()] == ServerMode::UnavailableOff {
            let st = &ctx.server_states[host.index()];
            let gap = ctx.slot.saturating_sub(st.off_since.unwrap_or(0));
            let limit = graph.node(*host).power.t_off_min;
            out.push(Violation::OffTime { node: *host, gap, limit });
        }
    }
    if s.routes.len() != req.edges.len() {
        out.push(Violation::PathSelection { request: id, edge: s.routes.len(), reason: "one route per edge required" });
        return;
    }
    for (i, (edge, route)) in req.edges.iter().zip(&s.routes).enumerate() {
        let (a, b) = (s.hosts[edge.from_index], s.hosts[edge.to_index]);
        if let Some(reason) = route_defect(route, a, b, graph) {
            out.push(Violation::PathSelection { request: id, edge: i, reason });
        }
    }
    let total = service_delay(s, req);
    if total > req.max_delay + FEASIBILITY_TOL {
        out.push(Violation::Delay { request: id, total, budget: req.max_delay });
    }
}

fn route_defect(route: &Path, a: NodeId, b: NodeId, graph: &NetworkGraph) -> Option<&'static str> {
    if route.nodes.is_empty() || route.source() != a || route.target() != b {
        return Some("route does not join the edge's hosts");
    }
    if route.links.len() + 1 != route.nodes.len() {
        return Some("route node and link lists disagree");
    }
    let mut delay = 0.0;
    for (i, l) in route.links.iter().enumerate() {
        if l.index() >= graph.link_count() {
            return Some("route uses an unknown link");
        }
        let link = graph.link(*l);
        if link.other(route.nodes[i]) != Some(route.nodes[i + 1]) {
            return Some("consecutive route nodes are not joined by the listed link");
        }
        delay += link.delay;
    }
    let mut sorted = route.nodes.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != route.nodes.len() {
        return Some("route revisits a node");
    }
    if (delay - route.total_delay).abs() > FEASIBILITY_TOL {
        return Some("route delay does not match its links");
    }
    None
}

/// Idle streaks within `t_idle_max` and off durations of available servers at least
/// `t_off_min`, for the states carried in from the previous slot.
fn audit_server_states(scenario: &Scenario<'_>, out: &mut Vec<Violation>) {
    let Some(at) = scenario.ctx.slot.checked_sub(1) else { return };
    for (node, st) in scenario.graph.nodes().iter().zip(&scenario.ctx.server_states) {
        let p = &node.power;
        match st.mode {
            ServerMode::Idle => {
                let since = st.idle_since.unwrap_or(at);
                let streak = at.saturating_sub(since) + 1;
                if streak > p.t_idle_max {
                    out.push(Violation::IdleTime { node: node.id, gap: streak, limit: p.t_idle_max });
                }
            }
            ServerMode::AvailableOff => {
                if let Some(since) = st.off_since {
                    let gap = at.saturating_sub(since);
                    if gap < p.t_off_min {
                        out.push(Violation::OffTime { node: node.id, gap, limit: p.t_off_min });
                    }
                }
            }
            ServerMode::On | ServerMode::UnavailableOff => {}
        }
    }
}
