//! SFC requests and seeded workload generation.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::topology::{NetworkGraph, NodeId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u32);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnfSpec {
    /// vCPUs.
    pub cpu: f64,
    /// GB.
    pub memory: f64,
    /// ms.
    pub exec_time: f64,
    pub is_pseudo: bool,
}

impl VnfSpec {
    pub fn new(cpu: f64, memory: f64, exec_time: f64) -> Self {
        Self { cpu, memory, exec_time, is_pseudo: false }
    }

    /// Source/destination endpoint with no demands.
    pub fn pseudo() -> Self {
        Self { cpu: 0.0, memory: 0.0, exec_time: 0.0, is_pseudo: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfcEdge {
    pub from_index: usize,
    pub to_index: usize,
    /// Mbps.
    pub bandwidth: f64,
}

/// A service function chain: `vnfs[0]` and `vnfs[last]` are the pinned source and
/// destination endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRequest {
    pub id: RequestId,
    pub source: NodeId,
    pub destination: NodeId,
    pub vnfs: Vec<VnfSpec>,
    pub edges: Vec<SfcEdge>,
    /// ms.
    pub max_delay: f64,
    pub arrival_slot: u32,
    pub duration_slots: u32,
}

impl UserRequest {
    /// Builds a chain `source -> real[0] -> ... -> destination`. `bandwidths` has one entry
    /// per chain edge (`real.len() + 1`).
    #[allow(clippy::too_many_arguments)]
    pub fn chain(
        id: RequestId,
        source: NodeId,
        destination: NodeId,
        real: &[VnfSpec],
        bandwidths: &[f64],
        max_delay: f64,
        arrival_slot: u32,
        duration_slots: u32,
    ) -> Result<Self> {
        let mut vnfs = Vec::with_capacity(real.len() + 2);
        vnfs.push(VnfSpec::pseudo());
        vnfs.extend_from_slice(real);
        vnfs.push(VnfSpec::pseudo());
        let edges = bandwidths
            .iter()
            .enumerate()
            .map(|(i, &bandwidth)| SfcEdge { from_index: i, to_index: i + 1, bandwidth })
            .collect();
        let req = Self { id, source, destination, vnfs, edges, max_delay, arrival_slot, duration_slots };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vnfs.len();
        if n < 2 || !self.vnfs[0].is_pseudo || !self.vnfs[n - 1].is_pseudo {
            return Err(Error::InvalidParameter("chain must start and end with pseudo VNFs"));
        }
        for v in &self.vnfs[1..n - 1] {
            if v.is_pseudo || !(v.cpu > 0.0 && v.memory > 0.0 && v.exec_time > 0.0) {
                return Err(Error::InvalidParameter("real VNFs need positive demands"));
            }
        }
        if self.edges.len() != n - 1 {
            return Err(Error::InvalidParameter("a chain has one edge per consecutive VNF pair"));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.from_index != i || e.to_index != i + 1 || !(e.bandwidth > 0.0) {
                return Err(Error::InvalidParameter("edges must link consecutive VNFs with bandwidth > 0"));
            }
        }
        if self.max_delay < self.exec_time_total() {
            return Err(Error::InvalidParameter("max_delay below total execution time"));
        }
        if self.duration_slots < 1 {
            return Err(Error::InvalidParameter("duration_slots must be >= 1"));
        }
        Ok(())
    }

    pub fn real_vnfs(&self) -> &[VnfSpec] {
        &self.vnfs[1..self.vnfs.len() - 1]
    }

    pub fn exec_time_total(&self) -> f64 {
        self.vnfs.iter().filter(|v| !v.is_pseudo).map(|v| v.exec_time).sum()
    }

    /// Last slot (inclusive) in which the request holds its resources.
    pub fn last_slot(&self) -> u32 {
        self.arrival_slot + self.duration_slots - 1
    }
}

/// Inclusive integer range sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: u32,
    pub hi: u32,
}

impl UniformRange {
    pub const fn new(lo: u32, hi: u32) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(self.lo..=self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo as f64 && v <= self.hi as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadRanges {
    /// Real VNFs per chain.
    pub vnf_count: UniformRange,
    pub cpu: UniformRange,
    /// GB.
    pub memory: UniformRange,
    /// ms.
    pub exec_time: UniformRange,
    /// Mbps per chain edge.
    pub bandwidth: UniformRange,
    pub duration: UniformRange,
    /// Candidate paths averaged into each request's delay budget.
    pub budget_paths: usize,
}

impl Default for WorkloadRanges {
    fn default() -> Self {
        Self {
            vnf_count: UniformRange::new(5, 10),
            cpu: UniformRange::new(4, 8),
            memory: UniformRange::new(4, 16),
            exec_time: UniformRange::new(10, 30),
            bandwidth: UniformRange::new(10, 30),
            duration: UniformRange::new(1, 4),
            budget_paths: 8,
        }
    }
}

impl WorkloadRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [self.vnf_count, self.cpu, self.memory, self.exec_time, self.bandwidth, self.duration];
        if ranges.iter().any(|r| r.lo > r.hi) {
            return Err(Error::InvalidParameter("range with lo > hi"));
        }
        if self.cpu.lo == 0 || self.memory.lo == 0 || self.exec_time.lo == 0 || self.bandwidth.lo == 0 {
            return Err(Error::InvalidParameter("demands must be positive"));
        }
        if self.duration.lo == 0 || self.budget_paths == 0 {
            return Err(Error::InvalidParameter("duration and budget_paths must be >= 1"));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `(master, stream, index)`; used to derive independent per-slot
/// and per-repetition seeds from one master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const WORKLOAD_STREAM: u64 = 0x574F_524B;

/// Draws `count` requests for `slot`, with ids `0..count`. Deterministic in
/// `(rng_seed, slot, count, ranges, graph)`.
pub fn generate_requests(
    count: usize,
    graph: &NetworkGraph,
    ranges: &WorkloadRanges,
    rng_seed: u64,
    slot: u32,
) -> Result<Vec<UserRequest>> {
    ranges.validate()?;
    if graph.node_count() == 0 {
        return if count == 0 { Ok(Vec::new()) } else { Err(Error::InvalidGraph("empty graph")) };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, WORKLOAD_STREAM, slot as u64));
    let n = graph.node_count() as u32;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let source = NodeId(rng.gen_range(0..n));
        let destination = NodeId(rng.gen_range(0..n));
        let k = ranges.vnf_count.sample(&mut rng) as usize;
        let real: Vec<VnfSpec> = (0..k)
            .map(|_| {
                let cpu = ranges.cpu.sample(&mut rng) as f64;
                let memory = ranges.memory.sample(&mut rng) as f64;
                let exec = ranges.exec_time.sample(&mut rng) as f64;
                VnfSpec::new(cpu, memory, exec)
            })
            .collect();
        let bandwidths: Vec<f64> = (0..=k).map(|_| ranges.bandwidth.sample(&mut rng) as f64).collect();
        let duration = ranges.duration.sample(&mut rng);
        let exec: f64 = real.iter().map(|v| v.exec_time).sum();
        let transit = mean_candidate_delay(graph, source, destination, ranges.budget_paths)?;
        out.push(UserRequest::chain(
            RequestId(i as u32),
            source,
            destination,
            &real,
            &bandwidths,
            exec + transit,
            slot,
            duration,
        )?);
    }
    Ok(out)
}

fn mean_candidate_delay(graph: &NetworkGraph, s: NodeId, t: NodeId, d: usize) -> Result<f64> {
    let paths = graph.candidate_slice(s, t, d)?;
    Ok(paths.iter().map(|p| p.total_delay).sum::<f64>() / paths.len() as f64)
}

/// Total execution time of the real VNFs plus the mean delay of the request's `d`
/// candidate source-destination paths.
pub fn max_acceptable_delay(request: &UserRequest, graph: &NetworkGraph, d: usize) -> Result<f64> {
    Ok(request.exec_time_total() + mean_candidate_delay(graph, request.source, request.destination, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energymodel::PowerParams;
    use crate::topology::{Link, NodeTemplate, Resources, SatelliteNode};
    use alloc::vec;

    fn table3(planes: u32, per: u32) -> NetworkGraph {
        let t = NodeTemplate { capacity: Resources::new(112.0, 192.0), power: PowerParams::REFERENCE };
        NetworkGraph::build_constellation(planes, per, 600.0, 400.0, t, 100.0).unwrap()
    }

    fn req(source: u32, dest: u32, exec: &[f64]) -> UserRequest {
        let real: Vec<_> = exec.iter().map(|&e| VnfSpec::new(4.0, 4.0, e)).collect();
        let bw = vec![10.0; real.len() + 1];
        UserRequest::chain(RequestId(0), NodeId(source), NodeId(dest), &real, &bw, 1e9, 0, 1).unwrap()
    }

    #[test]
    fn empty_workload() {
        let g = table3(3, 2);
        assert!(generate_requests(0, &g, &WorkloadRanges::default(), 1, 0).unwrap().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let g = table3(3, 2);
        let a = generate_requests(10, &g, &WorkloadRanges::default(), 42, 0).unwrap();
        let b = generate_requests(10, &g, &WorkloadRanges::default(), 42, 0).unwrap();
        assert_eq!(a, b);
        let c = generate_requests(10, &g, &WorkloadRanges::default(), 42, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn budget_for_colocated_endpoints_is_execution_time() {
        let g = table3(3, 2);
        let r = req(2, 2, &[10.0, 10.0]);
        assert_eq!(max_acceptable_delay(&r, &g, 1).unwrap(), 20.0);
    }

    #[test]
    fn budget_averages_candidate_paths() {
        let node = |i: u32| SatelliteNode {
            id: NodeId(i),
            plane: 0,
            slot_in_plane: i,
            capacity: Resources::new(112.0, 192.0),
            power: PowerParams::REFERENCE,
        };
        let link = |a: u32, b: u32, delay: f64| Link {
            endpoints: (NodeId(a), NodeId(b)),
            bandwidth: 100.0,
            delay,
            distance: 0.0,
        };
        // 0 -> 1 directly (2 ms) or via 2 (1.5 + 2.5 = 4 ms)
        let g = NetworkGraph::new(
            vec![node(0), node(1), node(2)],
            vec![link(0, 1, 2.0), link(0, 2, 1.5), link(2, 1, 2.5)],
        )
        .unwrap();
        let r = req(0, 1, &[10.0]);
        assert!((max_acceptable_delay(&r, &g, 2).unwrap() - 13.0).abs() < 1e-12);
    }

    #[test]
    fn budget_single_path() {
        let g = table3(1, 2);
        let r = req(0, 1, &[10.0, 20.0, 30.0]);
        let got = max_acceptable_delay(&r, &g, 1).unwrap();
        assert!((got - 62.001_384_1).abs() < 1e-6);
    }

    #[test]
    fn chain_shape() {
        let r = req(0, 1, &[10.0, 20.0]);
        assert_eq!(r.vnfs.len(), 4);
        assert_eq!(r.edges.len(), 3);
        assert_eq!(r.real_vnfs().len(), 2);
        assert_eq!(r.exec_time_total(), 30.0);
    }

    #[test]
    fn derived_seeds_differ_per_stream_and_index() {
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    }
}
