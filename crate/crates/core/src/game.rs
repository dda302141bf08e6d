//! Best-response dynamics over the requests of one slot.
//!
//! Every iteration each request proposes its best response against the current profile; of
//! the proposals that raise the proposer's payoff by more than `epsilon`, the largest
//! improvement is committed (ties to the smallest request id). The loop stops when no
//! proposal improves, or after `k_max` iterations.
//!
//! Under [`EvaluationRule::Frozen`] a committed strategy keeps the cost it was evaluated with,
//! so the network payoff changes by exactly the winner's payoff change. A request whose
//! current decision would now be cheaper than its stored cost proposes that decision again;
//! such a refresh is an ordinary improving move.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::costing::{self, Scenario, Strategy, StrategyProfile, Weights};
use crate::placement::{self, PlacementConfig};
use crate::workload::RequestId;

/// What happens to the stored costs of the other requests after a commit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationRule {
    /// Stored costs stay as evaluated when committed.
    #[default]
    Frozen,
    /// Every stored cost is re-evaluated against the new profile.
    Reevaluate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub k_max: u32,
    pub epsilon: f64,
    pub placement: PlacementConfig,
    #[serde(default)]
    pub rule: EvaluationRule,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self { k_max: 100, epsilon: 1e-9, placement: PlacementConfig::default(), rule: EvaluationRule::Frozen }
    }
}

impl GameConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.k_max == 0 {
            return Err(crate::Error::InvalidParameter("k_max must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(crate::Error::InvalidParameter("epsilon must be > 0"));
        }
        self.placement.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: u32,
    pub winner: Option<RequestId>,
    pub phi_before: f64,
    pub phi_after: f64,
    /// Proposals improving by more than epsilon.
    pub proposals: usize,
    /// Winner's payoff gain, 0 without a winner.
    pub improvement: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub records: Vec<IterationRecord>,
    /// Stopped because no proposal improved, not because of `k_max`.
    pub converged: bool,
}

impl GameTrace {
    pub fn iterations(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn final_phi(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.phi_after)
    }
}

/// A request's proposal and how much it would gain.
struct Proposal {
    id: RequestId,
    strategy: Strategy,
    gain: f64,
}

fn propose(scenario: &Scenario<'_>, profile: &StrategyProfile, id: RequestId, config: &PlacementConfig) -> Option<Proposal> {
    let request = scenario.request(id)?;
    let current = profile.get(id).map_or(0.0, Strategy::payoff);
    let strategy = placement::best_response(scenario, request, profile, config)
        .unwrap_or_else(|| Strategy::unallocated(id));
    let gain = strategy.payoff() - current;
    Some(Proposal { id, strategy, gain })
}

#[cfg(feature = "parallel")]
fn proposals(scenario: &Scenario<'_>, profile: &StrategyProfile, config: &PlacementConfig) -> Vec<Proposal> {
    use rayon::prelude::*;
    let ids: Vec<RequestId> = scenario.requests.iter().map(|r| r.id).collect();
    ids.par_iter().filter_map(|&id| propose(scenario, profile, id, config)).collect()
}

#[cfg(not(feature = "parallel"))]
fn proposals(scenario: &Scenario<'_>, profile: &StrategyProfile, config: &PlacementConfig) -> Vec<Proposal> {
    scenario
        .requests
        .iter()
        .filter_map(|r| propose(scenario, profile, r.id, config))
        .collect()
}

/// Runs the dynamics from the all-unallocated profile.
pub fn pgra_run(scenario: &Scenario<'_>, config: &GameConfig) -> (StrategyProfile, GameTrace) {
    pgra_run_with(scenario, config, |_, _| {})
}

/// [`pgra_run`], calling `observe` with the profile after every committed iteration.
pub fn pgra_run_with(
    scenario: &Scenario<'_>,
    config: &GameConfig,
    mut observe: impl FnMut(&StrategyProfile, &IterationRecord),
) -> (StrategyProfile, GameTrace) {
    let weights = &config.placement.weights;
    let mut profile = StrategyProfile::empty_for(scenario.requests);
    let mut trace = GameTrace::default();
    for iteration in 1..=config.k_max {
        let phi_before = costing::network_payoff(&profile, weights);
        let improving: Vec<Proposal> = proposals(scenario, &profile, &config.placement)
            .into_iter()
            .filter(|p| p.gain > config.epsilon)
            .collect();
        let count = improving.len();
        // largest gain; ties to the smallest id
        let winner = improving.into_iter().fold(None::<Proposal>, |best, p| match best {
            Some(b) if b.gain > p.gain || (b.gain == p.gain && b.id < p.id) => Some(b),
            _ => Some(p),
        });
        let Some(winner) = winner else {
            trace.records.push(IterationRecord {
                iteration,
                winner: None,
                phi_before,
                phi_after: phi_before,
                proposals: 0,
                improvement: 0.0,
            });
            trace.converged = true;
            break;
        };
        profile.insert(winner.strategy);
        if config.rule == EvaluationRule::Reevaluate {
            costing::reevaluate_all(&mut profile, scenario, weights);
        }
        let record = IterationRecord {
            iteration,
            winner: Some(winner.id),
            phi_before,
            phi_after: costing::network_payoff(&profile, weights),
            proposals: count,
            improvement: winner.gain,
        };
        observe(&profile, &record);
        trace.records.push(record);
    }
    (profile, trace)
}

/// Whether no request can raise its stored payoff by more than `epsilon` with a best response
/// against the rest of `profile`.
pub fn is_nash(scenario: &Scenario<'_>, profile: &StrategyProfile, config: &GameConfig) -> bool {
    scenario.requests.iter().all(|r| {
        propose(scenario, profile, r.id, &config.placement).map_or(true, |p| p.gain <= config.epsilon)
    })
}

/// `|dPhi - dphi|` when `request` switches to `alt`, with every stored cost frozen.
pub fn potential_identity_check(
    profile: &StrategyProfile,
    request: RequestId,
    alt: &Strategy,
    weights: &Weights,
) -> f64 {
    let before = costing::network_payoff(profile, weights);
    let own_before = profile.get(request).map_or(0.0, |s| costing::user_payoff(s, weights));
    let mut next = profile.clone();
    let mut alt = alt.clone();
    alt.request_id = request;
    let own_after = costing::user_payoff(&alt, weights);
    next.insert(alt);
    let after = costing::network_payoff(&next, weights);
    ((after - before) - (own_after - own_before)).abs()
}
