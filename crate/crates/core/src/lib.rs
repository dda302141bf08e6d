//! Placement of service function chains (SFCs) onto an LEO satellite edge-computing network.
//!
//! The crate is `no_std` + `alloc`. It holds the whole decision model:
//!
//! * [`topology`]: the torus-wired constellation graph and its d-shortest candidate paths,
//! * [`workload`]: SFC requests and their seeded random generation,
//! * [`energymodel`]: the four-state edge server power machine and per-VNF power attribution,
//! * [`costing`]: normalized bandwidth/energy/delay costs, user payoffs, the network payoff
//!   and the full constraint check,
//! * [`placement`]: beam-searched (Viterbi) placement along a candidate path, plus a greedy
//!   baseline,
//! * [`game`]: best-response dynamics over the exact potential game (PGRA).
//!
//! IO, experiment drivers and the CLI live in the `satvnf` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod costing;
pub mod energymodel;
mod error;
pub mod game;
pub mod placement;
pub mod topology;
pub mod workload;

pub use costing::{
    CostBreakdown, SlotContext, Strategy, StrategyProfile, Violation, Weights,
};
pub use energymodel::{ChargePolicy, PowerParams, ServerMode, ServerState};
pub use error::Error;
pub use game::{EvaluationRule, GameConfig, GameTrace, IterationRecord};
pub use placement::PlacementConfig;
pub use topology::{Link, LinkId, NetworkGraph, NodeId, Path, PathSet, Resources, SatelliteNode};
pub use workload::{RequestId, SfcEdge, UserRequest, VnfSpec, WorkloadRanges};

pub type Result<T, E = Error> = core::result::Result<T, E>;
