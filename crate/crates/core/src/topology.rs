//! Satellite constellation graph, link delays and candidate routing paths.
//!
//! Paths are totally ordered by `(total_delay, hop_count, node sequence)`. Every path-set
//! computation in this module honors that order exactly, so a set for `d` paths is always a
//! prefix of the set for any larger `d`.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::energymodel::PowerParams;
use crate::{Error, Result};

/// Speed of light in vacuum, km/s.
pub const LIGHT_SPEED_KM_S: f64 = 299_792.458;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sat{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl LinkId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Per-resource amounts: vCPUs and memory in GB.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: f64,
    pub memory: f64,
}

impl Resources {
    pub const ZERO: Resources = Resources { cpu: 0.0, memory: 0.0 };

    pub const fn new(cpu: f64, memory: f64) -> Self {
        Self { cpu, memory }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatelliteNode {
    pub id: NodeId,
    pub plane: u32,
    pub slot_in_plane: u32,
    pub capacity: Resources,
    pub power: PowerParams,
}

/// Undirected inter-satellite link with one shared bandwidth budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub endpoints: (NodeId, NodeId),
    /// Mbps.
    pub bandwidth: f64,
    /// ms.
    pub delay: f64,
    /// km.
    pub distance: f64,
}

impl Link {
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        match self.endpoints {
            (a, b) if a == node => Some(b),
            (a, b) if b == node => Some(a),
            _ => None,
        }
    }
}

/// Propagation delay in ms over `distance_km` at light speed.
pub fn link_delay(distance_km: f64) -> f64 {
    distance_km / LIGHT_SPEED_KM_S * 1000.0
}

/// A walk through the graph. Loopless except for the out-and-back walks produced by
/// [`NetworkGraph::candidate_sd_paths`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// Sum of link delays, accumulated in walk order (ms).
    pub total_delay: f64,
}

impl Path {
    pub fn zero_hop(node: NodeId) -> Self {
        Self { nodes: vec![node], links: Vec::new(), total_delay: 0.0 }
    }

    #[inline]
    pub fn hop_count(&self) -> usize {
        self.links.len()
    }

    #[inline]
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    #[inline]
    pub fn target(&self) -> NodeId {
        self.nodes[self.nodes.len() - 1]
    }

    fn extended(&self, link: LinkId, next: NodeId, delay: f64) -> Path {
        let mut nodes = Vec::with_capacity(self.nodes.len() + 1);
        nodes.extend_from_slice(&self.nodes);
        nodes.push(next);
        let mut links = Vec::with_capacity(self.links.len() + 1);
        links.extend_from_slice(&self.links);
        links.push(link);
        Path { nodes, links, total_delay: self.total_delay + delay }
    }

    /// The canonical ranking: delay, then hops, then lexicographic node sequence.
    pub fn rank_cmp(&self, other: &Path) -> Ordering {
        self.total_delay
            .total_cmp(&other.total_delay)
            .then_with(|| self.hop_count().cmp(&other.hop_count()))
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub source: NodeId,
    pub destination: NodeId,
    pub paths: Vec<Path>,
}

/// Capacity and power configuration shared by every satellite of a constellation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTemplate {
    pub capacity: Resources,
    pub power: PowerParams,
}

#[derive(Clone, Debug, Default)]
struct PathCache {
    depth: usize,
    shortest: BTreeMap<(NodeId, NodeId), Vec<Path>>,
    candidates: BTreeMap<(NodeId, NodeId), Vec<Path>>,
}

/// Serialized form of a [`NetworkGraph`]: nodes and links only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<SatelliteNode>,
    pub links: Vec<Link>,
}

/// Satellite graph. Immutable once built; the path cache is filled through
/// [`NetworkGraph::warm_path_cache`] before the graph is shared.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct NetworkGraph {
    nodes: Vec<SatelliteNode>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    cache: PathCache,
}

impl TryFrom<GraphDocument> for NetworkGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        NetworkGraph::new(doc.nodes, doc.links)
    }
}

impl From<NetworkGraph> for GraphDocument {
    fn from(g: NetworkGraph) -> Self {
        GraphDocument { nodes: g.nodes, links: g.links }
    }
}

impl NetworkGraph {
    /// Validates and indexes a graph. Node ids must be `0..n` in order.
    pub fn new(nodes: Vec<SatelliteNode>, links: Vec<Link>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(Error::InvalidGraph("node ids must be dense and ordered"));
            }
            if !(n.capacity.cpu > 0.0 && n.capacity.memory > 0.0) {
                return Err(Error::InvalidGraph("node capacities must be positive"));
            }
            n.power.validate()?;
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            let (a, b) = l.endpoints;
            if a == b || a.index() >= nodes.len() || b.index() >= nodes.len() {
                return Err(Error::InvalidGraph("link endpoints must be distinct existing nodes"));
            }
            if !(l.bandwidth > 0.0 && l.delay > 0.0) {
                return Err(Error::InvalidGraph("link bandwidth and delay must be positive"));
            }
            let id = LinkId(i as u32);
            adjacency[a.index()].push((b, id));
            adjacency[b.index()].push((a, id));
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        Ok(Self { nodes, links, adjacency, cache: PathCache::default() })
    }

    pub fn nodes(&self) -> &[SatelliteNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node(&self, id: NodeId) -> &SatelliteNode {
        &self.nodes[id.index()]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Neighbors in ascending node id order.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[id.index()]
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id.index()].len()
    }

    /// Sum of undirected link bandwidth capacities (normalizer of the bandwidth cost).
    pub fn total_bandwidth(&self) -> f64 {
        self.links.iter().map(|l| l.bandwidth).sum()
    }

    /// Sum of server maximum powers (normalizer of the energy cost).
    pub fn total_max_power(&self) -> f64 {
        self.nodes.iter().map(|n| n.power.p_max).sum()
    }

    /// Overrides the delay of one link. Clears the path cache.
    pub fn set_link_delay(&mut self, id: LinkId, delay_ms: f64) -> Result<()> {
        if !(delay_ms > 0.0) {
            return Err(Error::InvalidGraph("link delay must be positive"));
        }
        self.links[id.index()].delay = delay_ms;
        self.cache = PathCache::default();
        Ok(())
    }

    /// Torus constellation: every satellite links to its in-plane predecessor and successor
    /// and to the same slot of the adjacent planes. Parallel duplicates are merged.
    pub fn build_constellation(
        planes: u32,
        sats_per_plane: u32,
        intra_plane_km: f64,
        inter_plane_km: f64,
        template: NodeTemplate,
        link_bw: f64,
    ) -> Result<Self> {
        if planes == 0 || sats_per_plane == 0 {
            return Err(Error::InvalidParameter("planes and sats_per_plane must be >= 1"));
        }
        let id = |p: u32, s: u32| NodeId(p * sats_per_plane + s);
        let nodes = (0..planes)
            .flat_map(|p| (0..sats_per_plane).map(move |s| (p, s)))
            .map(|(p, s)| SatelliteNode {
                id: id(p, s),
                plane: p,
                slot_in_plane: s,
                capacity: template.capacity,
                power: template.power,
            })
            .collect();

        let mut seen = BTreeMap::new();
        let mut links = Vec::new();
        let mut add = |a: NodeId, b: NodeId, km: f64| {
            if a == b {
                return;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if seen.insert(key, ()).is_none() {
                links.push(Link {
                    endpoints: key,
                    bandwidth: link_bw,
                    delay: link_delay(km),
                    distance: km,
                });
            }
        };
        for p in 0..planes {
            for s in 0..sats_per_plane {
                add(id(p, s), id(p, (s + 1) % sats_per_plane), intra_plane_km);
            }
        }
        for p in 0..planes {
            for s in 0..sats_per_plane {
                add(id(p, s), id((p + 1) % planes, s), inter_plane_km);
            }
        }
        NetworkGraph::new(nodes, links)
    }

    /// Precomputes shortest and candidate path sets for every ordered node pair up to `depth`
    /// paths each. Later queries with `d <= depth` are served from the cache.
    pub fn warm_path_cache(&mut self, depth: usize) {
        let depth = depth.max(1);
        if self.cache.depth >= depth {
            return;
        }
        let mut cache = PathCache { depth, ..PathCache::default() };
        for s in self.node_ids() {
            for t in self.node_ids() {
                if let Ok(paths) = self.compute_k_shortest(s, t, depth) {
                    cache.shortest.insert((s, t), paths);
                }
                if let Ok(paths) = self.compute_candidates(s, t, depth) {
                    cache.candidates.insert((s, t), paths);
                }
            }
        }
        self.cache = cache;
    }

    pub fn cached_depth(&self) -> usize {
        self.cache.depth
    }

    /// Up to `d` loopless paths from `s` to `t` in canonical order. `s == t` yields the
    /// zero-hop path only.
    pub fn k_shortest_paths(&self, s: NodeId, t: NodeId, d: usize) -> Result<PathSet> {
        let paths = self.shortest_slice(s, t, d)?.to_vec();
        Ok(PathSet { source: s, destination: t, paths })
    }

    /// Like [`k_shortest_paths`](Self::k_shortest_paths) but borrowing from the cache when
    /// it is deep enough.
    pub fn shortest_slice(&self, s: NodeId, t: NodeId, d: usize) -> Result<alloc::borrow::Cow<'_, [Path]>> {
        self.check_pair(s, t, d)?;
        if d <= self.cache.depth {
            return match self.cache.shortest.get(&(s, t)) {
                Some(p) => Ok(alloc::borrow::Cow::Borrowed(&p[..d.min(p.len())])),
                None => Err(Error::NoPath { from: s, to: t }),
            };
        }
        self.compute_k_shortest(s, t, d).map(alloc::borrow::Cow::Owned)
    }

    /// Candidate source-to-destination paths for a request. When `s == dest` the set is the
    /// zero-hop path followed by out-and-back walks to the `d - 1` nearest nodes.
    pub fn candidate_sd_paths(&self, s: NodeId, dest: NodeId, d: usize) -> Result<PathSet> {
        let paths = self.candidate_slice(s, dest, d)?.to_vec();
        Ok(PathSet { source: s, destination: dest, paths })
    }

    pub fn candidate_slice(&self, s: NodeId, dest: NodeId, d: usize) -> Result<alloc::borrow::Cow<'_, [Path]>> {
        self.check_pair(s, dest, d)?;
        if d <= self.cache.depth {
            return match self.cache.candidates.get(&(s, dest)) {
                Some(p) => Ok(alloc::borrow::Cow::Borrowed(&p[..d.min(p.len())])),
                None => Err(Error::NoPath { from: s, to: dest }),
            };
        }
        self.compute_candidates(s, dest, d).map(alloc::borrow::Cow::Owned)
    }

    fn check_pair(&self, s: NodeId, t: NodeId, d: usize) -> Result<()> {
        for n in [s, t] {
            if !self.contains(n) {
                return Err(Error::UnknownNode(n));
            }
        }
        if d == 0 {
            return Err(Error::InvalidParameter("d must be >= 1"));
        }
        Ok(())
    }

    fn compute_candidates(&self, s: NodeId, dest: NodeId, d: usize) -> Result<Vec<Path>> {
        if s != dest {
            return self.compute_k_shortest(s, dest, d);
        }
        let mut nearest: Vec<Path> = self
            .node_ids()
            .filter(|&v| v != s)
            .filter_map(|v| self.compute_k_shortest(s, v, 1).ok())
            .filter_map(|mut p| p.pop())
            .collect();
        nearest.sort_by(Path::rank_cmp);
        let mut out = vec![Path::zero_hop(s)];
        for there in nearest.into_iter().take(d - 1) {
            let mut walk = there.clone();
            for (i, &link) in there.links.iter().enumerate().rev() {
                let back = there.nodes[i];
                walk = walk.extended(link, back, self.link(link).delay);
            }
            out.push(walk);
        }
        out.sort_by(Path::rank_cmp);
        Ok(out)
    }

    /// Yen's loopless k-shortest paths. Spur paths come from an exact best-first search
    /// under the canonical order, so ties resolve identically to exhaustive enumeration.
    fn compute_k_shortest(&self, s: NodeId, t: NodeId, k: usize) -> Result<Vec<Path>> {
        if s == t {
            return Ok(vec![Path::zero_hop(s)]);
        }
        let no_nodes = vec![false; self.nodes.len()];
        let no_links = vec![false; self.links.len()];
        let first = self
            .best_extension(&Path::zero_hop(s), t, &no_nodes, &no_links)
            .ok_or(Error::NoPath { from: s, to: t })?;

        let mut accepted = vec![first];
        let mut pending: Vec<Path> = Vec::new();
        while accepted.len() < k {
            let prev = accepted.last().expect("non-empty").clone();
            for i in 0..prev.hop_count() {
                let root = Path {
                    nodes: prev.nodes[..=i].to_vec(),
                    links: prev.links[..i].to_vec(),
                    total_delay: prev.links[..i].iter().fold(0.0, |acc, &l| acc + self.link(l).delay),
                };
                let mut banned_links = no_links.clone();
                for p in &accepted {
                    if p.nodes.len() > i + 1 && p.nodes[..=i] == root.nodes[..] {
                        banned_links[p.links[i].index()] = true;
                    }
                }
                let mut banned_nodes = no_nodes.clone();
                for n in &root.nodes[..i] {
                    banned_nodes[n.index()] = true;
                }
                if let Some(p) = self.best_extension(&root, t, &banned_nodes, &banned_links) {
                    if !accepted.iter().chain(pending.iter()).any(|q| q.nodes == p.nodes) {
                        pending.push(p);
                    }
                }
            }
            let Some(best) = pending
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.rank_cmp(b.1))
                .map(|(i, _)| i)
            else {
                break;
            };
            accepted.push(pending.swap_remove(best));
        }
        Ok(accepted)
    }

    /// Minimal (canonical order) simple extension of `root` ending at `t`, avoiding banned
    /// nodes and links. Returns `None` if `t` is unreachable.
    fn best_extension(
        &self,
        root: &Path,
        t: NodeId,
        banned_nodes: &[bool],
        banned_links: &[bool],
    ) -> Option<Path> {
        let start = root.target();
        if !self.reachable(start, t, root, banned_nodes, banned_links) {
            return None;
        }
        let mut heap = BinaryHeap::new();
        heap.push(Frontier(root.clone()));
        while let Some(Frontier(p)) = heap.pop() {
            let here = p.target();
            if here == t {
                return Some(p);
            }
            for &(next, link) in self.neighbors(here) {
                if banned_nodes[next.index()] || banned_links[link.index()] || p.nodes.contains(&next) {
                    continue;
                }
                heap.push(Frontier(p.extended(link, next, self.link(link).delay)));
            }
        }
        None
    }

    fn reachable(
        &self,
        from: NodeId,
        to: NodeId,
        root: &Path,
        banned_nodes: &[bool],
        banned_links: &[bool],
    ) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        for n in &root.nodes {
            seen[n.index()] = true;
        }
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            for &(next, link) in self.neighbors(n) {
                if !seen[next.index()] && !banned_nodes[next.index()] && !banned_links[link.index()] {
                    seen[next.index()] = true;
                    stack.push(next);
                }
            }
        }
        false
    }
}

/// Min-heap adapter over the canonical path order.
struct Frontier(Path);

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.rank_cmp(&self.0)
    }
}
