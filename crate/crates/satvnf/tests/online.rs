use satvnf::harness::run_online;
use satvnf::{Algorithm, Mode, SimulationConfig};
use satvnf_core::workload::UniformRange;
use satvnf_core::costing::{check_feasibility, Scenario};
use satvnf_core::{
    ChargePolicy, NodeId, Path, RequestId, ServerMode, ServerState, SlotContext, Strategy, StrategyProfile, UserRequest,
    VnfSpec,
};

fn online(slots: u32, per_slot: (u32, u32)) -> SimulationConfig {
    SimulationConfig {
        mode: Mode::Online,
        slots,
        requests_per_slot: UniformRange::new(per_slot.0, per_slot.1),
        ..SimulationConfig::default()
    }
}

fn colocated(req: &UserRequest, node: NodeId) -> Strategy {
    Strategy {
        request_id: req.id,
        hosts: vec![node; req.vnfs.len()],
        routes: vec![Path::zero_hop(node); req.edges.len()],
        allocated: true,
        cost: None,
    }
}

#[test]
fn two_slot_request_is_held_at_slots_3_and_4() {
    let c = SimulationConfig::default();
    let g = c.build_graph().unwrap();
    let n0 = NodeId(0);
    let big = [VnfSpec::new(80.0, 8.0, 10.0)];
    let old = UserRequest::chain(RequestId(0), n0, n0, &big, &[10.0, 10.0], 100.0, 3, 2).unwrap();
    let old_s = colocated(&old, n0);
    let states = vec![ServerState::on(); g.node_count()];

    // slot 3: the request itself is placed, and its 80 vCPU leave no room for another 40
    let newcomer = |id: u32, slot: u32| UserRequest::chain(RequestId(id), n0, n0, &[VnfSpec::new(40.0, 8.0, 10.0)], &[10.0, 10.0], 100.0, slot, 1).unwrap();
    let ctx3 = SlotContext::new(&g, 3, states.clone(), &[], ChargePolicy::Once);
    let reqs3 = [old.clone(), newcomer(1, 3)];
    let mut p3 = StrategyProfile::new();
    p3.insert(old_s.clone());
    p3.insert(colocated(&reqs3[1], n0));
    assert!(!check_feasibility(&p3, &Scenario::new(&g, &ctx3, &reqs3)).is_empty());

    for (slot, held) in [(4u32, true), (5, false)] {
        let ctx = SlotContext::new(&g, slot, states.clone(), &[(&old, &old_s)], ChargePolicy::Once);
        assert_eq!(ctx.prior_usage[0].cpu, if held { 80.0 } else { 0.0 }, "slot {slot}");
        let reqs = [newcomer(2, slot)];
        let mut p = StrategyProfile::new();
        p.insert(colocated(&reqs[0], n0));
        let violations = check_feasibility(&p, &Scenario::new(&g, &ctx, &reqs));
        assert_eq!(!violations.is_empty(), held, "slot {slot}: {violations:?}");
    }
}

#[test]
fn busy_servers_always_host_running_requests() {
    let c = online(20, (1, 2));
    let run = run_online(&c, Algorithm::Pgra, 5).unwrap();
    let mut running = vec![0u32; run.slots.len()];
    for slot in &run.slots {
        for req in &slot.requests {
            if slot.outcome.profile.get(req.id).is_some_and(|s| s.allocated) {
                for t in req.arrival_slot..=req.last_slot().min(run.slots.len() as u32 - 1) {
                    running[t as usize] += 1;
                }
            }
        }
    }
    for (t, slot) in run.slots.iter().enumerate() {
        let busy = slot.states.iter().filter(|s| s.mode == ServerMode::On).count();
        assert_eq!(busy > 0, running[t] > 0, "slot {t}");
    }
}

#[test]
fn phi_is_bounded_by_slot_requests() {
    let c = online(50, (5, 10));
    let run = run_online(&c, Algorithm::Pgra, 2).unwrap();
    assert_eq!(run.metrics.len(), 50);
    for (m, slot) in run.metrics.iter().zip(&run.slots) {
        assert!(m.phi >= 0.0 && m.phi <= slot.requests.len() as f64);
        assert!((0.0..=1.0).contains(&m.allocated_fraction));
        assert!((5..=10).contains(&slot.requests.len()));
    }
    assert_eq!(run.violations().count(), 0);
}

#[test]
fn online_runs_are_deterministic() {
    let c = online(15, (5, 10));
    for a in Algorithm::ALL {
        let x = run_online(&c, a, 9).unwrap();
        let y = run_online(&c, a, 9).unwrap();
        assert_eq!(x.metrics, y.metrics);
        assert_eq!(x.timeline, y.timeline);
    }
}
