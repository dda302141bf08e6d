//! Simulation configuration, read from JSON.
//!
//! Every top-level field is optional and falls back to the reference setting (six satellites,
//! 112 vCPU / 192 GB servers, 100 Mbps links). Nested objects, when present, must be complete.

use std::path::Path;

use serde::{Deserialize, Serialize};

use satvnf_core::topology::NodeTemplate;
use satvnf_core::workload::UniformRange;
use satvnf_core::{ChargePolicy, GameConfig, NetworkGraph, PowerParams, Resources, ServerState, WorkloadRanges};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub planes: u32,
    pub sats_per_plane: u32,
    pub intra_plane_km: f64,
    pub inter_plane_km: f64,
    /// Mbps per inter-satellite link.
    pub link_bandwidth: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { planes: 3, sats_per_plane: 2, intra_plane_km: 600.0, inter_plane_km: 400.0, link_bandwidth: 100.0 }
    }
}

/// State of every server before the first slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialServer {
    #[default]
    AvailableOff,
    Idle,
}

impl InitialServer {
    pub fn state(self) -> ServerState {
        match self {
            InitialServer::AvailableOff => ServerState::initially_off(),
            InitialServer::Idle => ServerState::idle(0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub cpu: f64,
    /// GB.
    pub memory: f64,
    pub power: PowerParams,
    #[serde(default)]
    pub charge_policy: ChargePolicy,
    #[serde(default)]
    pub initial: InitialServer,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            cpu: 112.0,
            memory: 192.0,
            power: PowerParams::REFERENCE,
            charge_policy: ChargePolicy::Once,
            initial: InitialServer::AvailableOff,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Batch,
    Online,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Pgra,
    Viterbi,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pgra, Algorithm::Viterbi, Algorithm::Greedy];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Pgra => "pgra",
            Algorithm::Viterbi => "viterbi",
            Algorithm::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub topology: TopologyConfig,
    pub server: ServerConfig,
    pub workload: WorkloadRanges,
    pub game: GameConfig,
    pub mode: Mode,
    /// Requests per batch instance.
    pub requests: usize,
    /// Online horizon.
    pub slots: u32,
    /// New requests per online slot.
    pub requests_per_slot: UniformRange,
    pub seeds: Vec<u64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            server: ServerConfig::default(),
            workload: WorkloadRanges::default(),
            game: GameConfig::default(),
            mode: Mode::Batch,
            requests: 10,
            slots: 50,
            requests_per_slot: UniformRange::new(5, 10),
            seeds: vec![0],
        }
    }
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        let config = Self::from_json(&text).map_err(|source| HarnessError::Json { path: path.into(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Total satellites must be 6, 9, 12 or 15: three planes of 2 to 5.
    pub fn set_nodes(&mut self, nodes: u32) -> Result<()> {
        if !matches!(nodes, 6 | 9 | 12 | 15) {
            return Err(HarnessError::Config(format!("--nodes must be 6, 9, 12 or 15, got {nodes}")));
        }
        self.topology.planes = 3;
        self.topology.sats_per_plane = nodes / 3;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        if t.planes == 0 || t.sats_per_plane == 0 {
            return Err(HarnessError::Config("planes and sats_per_plane must be >= 1".into()));
        }
        if !(t.intra_plane_km > 0.0 && t.inter_plane_km > 0.0 && t.link_bandwidth > 0.0) {
            return Err(HarnessError::Config("distances and link bandwidth must be positive".into()));
        }
        if !(self.server.cpu > 0.0 && self.server.memory > 0.0) {
            return Err(HarnessError::Config("server capacities must be positive".into()));
        }
        self.server.power.validate()?;
        self.workload.validate()?;
        self.game.validate()?;
        let r = self.requests_per_slot;
        if r.lo > r.hi {
            return Err(HarnessError::Config("requests_per_slot has lo > hi".into()));
        }
        if self.mode == Mode::Online && self.slots == 0 {
            return Err(HarnessError::Config("online mode needs slots >= 1".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        (self.topology.planes * self.topology.sats_per_plane) as usize
    }

    /// The constellation with its path cache warmed deep enough for `d` and the delay budget.
    pub fn build_graph(&self) -> Result<NetworkGraph> {
        let t = &self.topology;
        let template = NodeTemplate {
            capacity: Resources::new(self.server.cpu, self.server.memory),
            power: self.server.power,
        };
        let mut g = NetworkGraph::build_constellation(
            t.planes,
            t.sats_per_plane,
            t.intra_plane_km,
            t.inter_plane_km,
            template,
            t.link_bandwidth,
        )?;
        g.warm_path_cache(self.game.placement.d.max(self.workload.budget_paths));
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_keeps_defaults() {
        let c = SimulationConfig::from_json(r#"{"requests": 25, "mode": "online"}"#).unwrap();
        assert_eq!(c.requests, 25);
        assert_eq!(c.mode, Mode::Online);
        assert_eq!(c.topology, TopologyConfig::default());
        assert_eq!(c.game, GameConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = SimulationConfig::default();
        c.set_nodes(12).unwrap();
        c.seeds = vec![1, 2, 3];
        let back = SimulationConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_nodes() {
        assert!(SimulationConfig::from_json(r#"{"request": 5}"#).is_err());
        assert!(SimulationConfig::default().set_nodes(7).is_err());
    }

    #[test]
    fn node_counts_map_to_planes() {
        for n in [6, 9, 12, 15] {
            let mut c = SimulationConfig::default();
            c.set_nodes(n).unwrap();
            assert_eq!(c.node_count(), n as usize);
            assert_eq!(c.build_graph().unwrap().node_count(), n as usize);
        }
    }
}
