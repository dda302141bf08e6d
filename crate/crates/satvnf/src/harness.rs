//! Experiment drivers: one-shot batch instances, the slotted online simulation and the
//! Taguchi sweep over `d` and the beam width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use satvnf_core::costing::{self, check_feasibility, Scenario};
use satvnf_core::energymodel::step_server_state;
use satvnf_core::game::{pgra_run_with, GameTrace, IterationRecord};
use satvnf_core::placement::{best_response, greedy_place};
use satvnf_core::workload::{derive_seed, generate_requests};
use satvnf_core::{
    GameConfig, NetworkGraph, RequestId, ServerState, SlotContext, Strategy, StrategyProfile, UserRequest, Violation,
};

use crate::config::{Algorithm, Mode, SimulationConfig};
use crate::error::{HarnessError, Result};

const COUNT_STREAM: u64 = 0x434F_554E;
const TAGUCHI_STREAM: u64 = 0x5441_4755;

/// Aggregates of one slot (or one batch instance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub slot: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Network payoff.
    pub phi: f64,
    /// 1.0 when the slot has no requests.
    pub allocated_fraction: f64,
    pub mean_bw: f64,
    pub mean_power: f64,
    pub mean_delay: f64,
    pub iterations: u32,
}

/// One request's cost components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub request_id: u32,
    pub bw: f64,
    pub power: f64,
    pub delay: f64,
    pub payoff: f64,
    pub allocated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u32,
    pub winner: Option<u32>,
    pub phi: f64,
    pub improvement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub slot: u32,
    pub node: u32,
    pub mode: String,
    /// W drawn during the slot.
    pub power: f64,
}

/// Outcome of one algorithm on one slot's requests.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome {
    pub profile: StrategyProfile,
    pub trace: Option<GameTrace>,
    /// Feasibility checks run and the violations they found, per committed iteration.
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl SlotOutcome {
    pub fn iterations(&self) -> u32 {
        self.trace.as_ref().map_or(1, GameTrace::iterations)
    }
}

/// Places `scenario.requests` with `algorithm`. Baselines take the requests once, in id order,
/// each against the placements made before it.
pub fn solve(scenario: &Scenario<'_>, algorithm: Algorithm, game: &GameConfig) -> SlotOutcome {
    let mut checks = 0;
    let mut violations = Vec::new();
    let mut audit = |p: &StrategyProfile| {
        checks += 1;
        violations.extend(check_feasibility(p, scenario));
    };
    let (profile, trace) = match algorithm {
        Algorithm::Pgra => {
            let (p, t) = pgra_run_with(scenario, game, |p: &StrategyProfile, _: &IterationRecord| audit(p));
            (p, Some(t))
        }
        Algorithm::Viterbi | Algorithm::Greedy => {
            let mut profile = StrategyProfile::empty_for(scenario.requests);
            for r in scenario.requests {
                let placed = match algorithm {
                    Algorithm::Viterbi => best_response(scenario, r, &profile, &game.placement),
                    _ => greedy_place(scenario, r, &profile, &game.placement),
                };
                if let Some(s) = placed {
                    profile.insert(s);
                    audit(&profile);
                }
            }
            (profile, None)
        }
    };
    audit(&profile);
    SlotOutcome { profile, trace, checks, violations }
}

pub fn slot_metrics(slot: u32, algorithm: Algorithm, seed: u64, outcome: &SlotOutcome, game: &GameConfig) -> SlotMetrics {
    let profile = &outcome.profile;
    let allocated: Vec<_> = profile.allocated().filter_map(|s| s.cost).collect();
    let n = allocated.len();
    let mean = |f: fn(&costing::CostBreakdown) -> f64| {
        if n == 0 {
            0.0
        } else {
            allocated.iter().map(f).sum::<f64>() / n as f64
        }
    };
    SlotMetrics {
        slot,
        algorithm,
        seed,
        phi: costing::network_payoff(profile, &game.placement.weights),
        allocated_fraction: if profile.is_empty() { 1.0 } else { n as f64 / profile.len() as f64 },
        mean_bw: mean(|c| c.bw),
        mean_power: mean(|c| c.power),
        mean_delay: mean(|c| c.delay),
        iterations: outcome.iterations(),
    }
}

pub fn cost_rows(profile: &StrategyProfile) -> Vec<CostRow> {
    profile
        .strategies
        .values()
        .map(|s| {
            let c = s.cost.filter(|_| s.allocated);
            CostRow {
                request_id: s.request_id.0,
                bw: c.map_or(0.0, |c| c.bw),
                power: c.map_or(0.0, |c| c.power),
                delay: c.map_or(0.0, |c| c.delay),
                payoff: s.payoff(),
                allocated: s.allocated,
            }
        })
        .collect()
}

pub fn trace_rows(trace: &GameTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow { iteration: r.iteration, winner: r.winner.map(|w| w.0), phi: r.phi_after, improvement: r.improvement })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BatchRun {
    pub graph: NetworkGraph,
    pub requests: Vec<UserRequest>,
    pub outcome: SlotOutcome,
    pub metrics: SlotMetrics,
}

/// `config.requests` requests at slot 0, placed once by `algorithm`.
pub fn run_batch(config: &SimulationConfig, algorithm: Algorithm, seed: u64) -> Result<BatchRun> {
    if config.mode != Mode::Batch {
        return Err(HarnessError::Config("run_batch needs mode = batch".into()));
    }
    config.validate()?;
    let graph = config.build_graph()?;
    run_batch_on(&graph, config, algorithm, seed)
}

/// [`run_batch`] on a prebuilt graph.
pub fn run_batch_on(graph: &NetworkGraph, config: &SimulationConfig, algorithm: Algorithm, seed: u64) -> Result<BatchRun> {
    let requests = generate_requests(config.requests, graph, &config.workload, seed, 0)?;
    let ctx = SlotContext::initial(graph, config.server.initial.state(), config.server.charge_policy);
    let scenario = Scenario::new(graph, &ctx, &requests);
    let outcome = solve(&scenario, algorithm, &config.game);
    let metrics = slot_metrics(0, algorithm, seed, &outcome, &config.game);
    Ok(BatchRun { graph: graph.clone(), requests, outcome, metrics })
}

/// What happened in one online slot.
#[derive(Clone, Debug)]
pub struct SlotRecord {
    pub requests: Vec<UserRequest>,
    pub outcome: SlotOutcome,
    /// Server states during the slot.
    pub states: Vec<ServerState>,
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub metrics: Vec<SlotMetrics>,
    pub timeline: Vec<TimelineRow>,
    pub slots: Vec<SlotRecord>,
}

impl OnlineRun {
    pub fn checks(&self) -> usize {
        self.slots.iter().map(|s| s.outcome.checks).sum()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.slots.iter().flat_map(|s| &s.outcome.violations)
    }
}

/// Slotted simulation: each slot releases expired requests, draws new ones, places them
/// against everything still running, then advances every server.
pub fn run_online(config: &SimulationConfig, algorithm: Algorithm, seed: u64) -> Result<OnlineRun> {
    if config.mode != Mode::Online {
        return Err(HarnessError::Config("run_online needs mode = online".into()));
    }
    config.validate()?;
    let graph = config.build_graph()?;
    let policy = config.server.charge_policy;
    let mut states = vec![config.server.initial.state(); graph.node_count()];
    let mut running: Vec<(UserRequest, Strategy)> = Vec::new();
    let mut next_id = 0u32;
    let mut run = OnlineRun { metrics: Vec::new(), timeline: Vec::new(), slots: Vec::new() };

    for slot in 0..config.slots {
        running.retain(|(r, _)| r.last_slot() >= slot);
        let committed: Vec<(&UserRequest, &Strategy)> = running.iter().map(|(r, s)| (r, s)).collect();
        let ctx = SlotContext::new(&graph, slot, states.clone(), &committed, policy);

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, COUNT_STREAM, slot as u64));
        let count = rng.gen_range(config.requests_per_slot.lo..=config.requests_per_slot.hi) as usize;
        let mut requests = generate_requests(count, &graph, &config.workload, seed, slot)?;
        for r in &mut requests {
            r.id = RequestId(next_id + r.id.0);
        }
        next_id += count as u32;

        let scenario = Scenario::new(&graph, &ctx, &requests);
        let outcome = solve(&scenario, algorithm, &config.game);

        let mut used_cpu = ctx.prior_usage.iter().map(|u| u.cpu).collect::<Vec<_>>();
        let mut occupied: Vec<bool> = used_cpu.iter().map(|&c| c > 0.0).collect();
        for s in outcome.profile.allocated() {
            let req = scenario.request(s.request_id).expect("profile keys come from the slot");
            for (vnf, host) in req.vnfs.iter().zip(&s.hosts) {
                if !vnf.is_pseudo {
                    used_cpu[host.index()] += vnf.cpu;
                    occupied[host.index()] = true;
                }
            }
        }
        for (i, node) in graph.nodes().iter().enumerate() {
            states[i] = step_server_state(&states[i], &node.power, occupied[i], slot)?;
            run.timeline.push(TimelineRow {
                slot,
                node: node.id.0,
                mode: states[i].mode.as_str().to_string(),
                power: states[i].power(&node.power, used_cpu[i], node.capacity.cpu),
            });
        }

        run.metrics.push(slot_metrics(slot, algorithm, seed, &outcome, &config.game));
        for s in outcome.profile.allocated() {
            let req = scenario.request(s.request_id).expect("profile keys come from the slot");
            running.push((req.clone(), s.clone()));
        }
        run.slots.push(SlotRecord { requests, outcome, states: states.clone() });
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaguchiRow {
    pub d: usize,
    pub beam: usize,
    pub requests: usize,
    pub mean_phi: f64,
    pub mean_allocated_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainEffect {
    /// `d` or `beam`.
    pub factor: String,
    pub level: usize,
    pub requests: usize,
    pub mean_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaguchiTable {
    pub rows: Vec<TaguchiRow>,
    pub main_effects: Vec<MainEffect>,
}

impl TaguchiTable {
    pub fn row(&self, d: usize, beam: usize, requests: usize) -> Option<&TaguchiRow> {
        self.rows.iter().find(|r| r.d == d && r.beam == beam && r.requests == requests)
    }

    /// Main-effect means of `factor` for `requests`, in level order.
    pub fn effect_curve(&self, factor: &str, requests: usize) -> Vec<f64> {
        self.main_effects
            .iter()
            .filter(|e| e.factor == factor && e.requests == requests)
            .map(|e| e.mean_phi)
            .collect()
    }
}

/// Mean PGRA network payoff over `repetitions` batch instances for every (d, beam) pair and
/// every request count. Repetition `r` of a request count uses the same workload for all
/// pairs; its seed is derived from `master_seed`.
pub fn run_taguchi(
    config: &SimulationConfig,
    d_levels: &[usize],
    b_levels: &[usize],
    m_values: &[usize],
    repetitions: usize,
    master_seed: u64,
) -> Result<TaguchiTable> {
    if d_levels.is_empty() || b_levels.is_empty() || m_values.is_empty() || repetitions == 0 {
        return Err(HarnessError::Config("taguchi needs levels, request counts and repetitions".into()));
    }
    let mut base = config.clone();
    base.mode = Mode::Batch;
    base.game.placement.d = d_levels.iter().copied().max().unwrap_or(1);
    base.validate()?;
    let graph = base.build_graph()?;

    let cells: Vec<(usize, usize, usize, usize)> = m_values
        .iter()
        .flat_map(|&m| {
            d_levels
                .iter()
                .flat_map(move |&d| b_levels.iter().flat_map(move |&b| (0..repetitions).map(move |r| (m, d, b, r))))
        })
        .collect();
    let results: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&(m, d, b, rep)| {
            let mut c = base.clone();
            c.requests = m;
            c.game.placement.d = d;
            c.game.placement.beam = b;
            c.validate()?;
            let seed = derive_seed(master_seed, TAGUCHI_STREAM ^ m as u64, rep as u64);
            let run = run_batch_on(&graph, &c, Algorithm::Pgra, seed)?;
            Ok((run.metrics.phi, run.metrics.allocated_fraction))
        })
        .collect();

    let mut rows = Vec::new();
    let mut it = results.into_iter();
    for &m in m_values {
        for &d in d_levels {
            for &b in b_levels {
                let (mut phi, mut frac) = (0.0, 0.0);
                for _ in 0..repetitions {
                    let (p, f) = it.next().expect("one result per cell")?;
                    phi += p;
                    frac += f;
                }
                let n = repetitions as f64;
                rows.push(TaguchiRow { d, beam: b, requests: m, mean_phi: phi / n, mean_allocated_fraction: frac / n });
            }
        }
    }

    let mut main_effects = Vec::new();
    for &m in m_values {
        for (factor, levels) in [("d", d_levels), ("beam", b_levels)] {
            for &level in levels {
                let picked: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.requests == m && if factor == "d" { r.d == level } else { r.beam == level })
                    .map(|r| r.mean_phi)
                    .collect();
                main_effects.push(MainEffect {
                    factor: factor.to_string(),
                    level,
                    requests: m,
                    mean_phi: picked.iter().sum::<f64>() / picked.len() as f64,
                });
            }
        }
    }
    Ok(TaguchiTable { rows, main_effects })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(m: usize) -> SimulationConfig {
        SimulationConfig { requests: m, ..SimulationConfig::default() }
    }

    #[test]
    fn empty_batch() {
        let run = run_batch(&batch(0), Algorithm::Pgra, 3).unwrap();
        assert_eq!(run.metrics.phi, 0.0);
        assert_eq!(run.metrics.allocated_fraction, 1.0);
        assert_eq!(run.metrics.iterations, 1);
    }

    #[test]
    fn batch_is_deterministic() {
        for a in Algorithm::ALL {
            let x = run_batch(&batch(8), a, 17).unwrap().metrics;
            let y = run_batch(&batch(8), a, 17).unwrap().metrics;
            assert_eq!(x, y);
        }
    }

    #[test]
    fn wrong_mode_is_rejected() {
        let c = SimulationConfig { mode: Mode::Online, ..batch(3) };
        assert!(run_batch(&c, Algorithm::Pgra, 0).is_err());
        assert!(run_online(&batch(3), Algorithm::Pgra, 0).is_err());
    }

    #[test]
    fn one_slot_online_equals_batch() {
        let online = SimulationConfig { mode: Mode::Online, slots: 1, requests_per_slot: satvnf_core::workload::UniformRange::new(7, 7), ..batch(7) };
        let o = run_online(&online, Algorithm::Pgra, 4).unwrap();
        let b = run_batch(&batch(7), Algorithm::Pgra, 4).unwrap();
        assert_eq!(o.metrics[0], b.metrics);
        assert_eq!(o.slots[0].outcome.profile, b.outcome.profile);
    }
}
