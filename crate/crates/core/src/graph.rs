//! Dynamic duplication-deletion graph.
//!
//! Nodes live in an id-indexed slab (ids are never reused) plus a dense
//! `alive` list for O(1) uniform sampling. The degree histogram `f[i]` is
//! kept up to date on every edge change.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::DegreeDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;

#[derive(Clone, Debug)]
struct Node {
    neighbors: Vec<NodeId>,
    slot: usize,
}

#[derive(Clone, Debug, Default)]
pub struct DynamicGraph {
    nodes: Vec<Option<Node>>,
    alive: Vec<NodeId>,
    histogram: Vec<usize>,
    edge_count: usize,
    last_added: Option<NodeId>,
}

/// Telemetry for one call to [`evolve_step`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepOutcome {
    pub duplicated: bool,
    pub deleted: bool,
    /// Deletion fired but no eligible node was found.
    pub deletion_skipped: bool,
    pub parent_node: Option<NodeId>,
    pub new_node: Option<NodeId>,
    pub deleted_node: Option<NodeId>,
    /// Node created by the duplication that follows a deletion.
    pub replacement_node: Option<NodeId>,
}

/// Per-step graph dynamics: duplication probability `r` and the
/// state-indexed connection and deletion probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub r: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl GraphParams {
    pub fn single(r: f64, p: f64, q: f64) -> Self {
        Self {
            r,
            p: vec![p],
            q: vec![q],
        }
    }

    pub fn states(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.q.len() || self.p.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "p has {} states but q has {}",
                self.p.len(),
                self.q.len()
            )));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.r) {
            return Err(Error::InvalidParameter(format!("r = {} out of range", self.r)));
        }
        for (s, (&p, &q)) in self.p.iter().zip(&self.q).enumerate() {
            if !unit(p) {
                return Err(Error::InvalidParameter(format!("p[{s}] = {p} out of range")));
            }
            if !unit(q) {
                return Err(Error::InvalidParameter(format!("q[{s}] = {q} out of range")));
            }
        }
        Ok(())
    }
}

impl DynamicGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph on nodes `0..n` from an edge list.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut g = Self::new();
        for _ in 0..n {
            g.add_node();
        }
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at node {u}")));
            }
            if g.has_edge(u, v) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({u}, {v})")));
            }
            g.add_edge(u, v);
        }
        Ok(g)
    }

    /// Cycle on `n >= 3` nodes, the default fixed-size seed graph.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::GraphTooSmall(format!("cycle needs 3 nodes, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Two nodes joined by one edge, the default growing-mode seed.
    pub fn single_edge() -> Self {
        Self::from_edges(2, &[(0, 1)]).expect("valid edge")
    }

    pub fn node_count(&self) -> usize {
        self.alive.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, id: NodeId) -> bool {
        matches!(self.nodes.get(id), Some(Some(_)))
    }

    fn node(&self, id: NodeId) -> &Node {
        self.nodes[id].as_ref().expect("live node")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id].as_mut().expect("live node")
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.node(id).neighbors.len()
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.node(id).neighbors
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).contains(&v)
    }

    /// Live node ids in internal (sampling) order.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.alive
    }

    /// `f[i]` = number of nodes with degree `i`.
    pub fn degree_histogram(&self) -> &[usize] {
        &self.histogram
    }

    pub fn max_degree(&self) -> usize {
        self.histogram.iter().rposition(|&c| c > 0).unwrap_or(0)
    }

    pub fn last_added(&self) -> Option<NodeId> {
        self.last_added
    }

    pub fn set_last_added(&mut self, id: Option<NodeId>) {
        self.last_added = id;
    }

    pub fn sample_node<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        if self.alive.is_empty() {
            None
        } else {
            Some(self.alive[rng.gen_range(0..self.alive.len())])
        }
    }

    fn bump(&mut self, degree: usize, delta: isize) {
        if degree >= self.histogram.len() {
            let new_len = (degree + 1).max(self.histogram.len() * 2).max(8);
            self.histogram.resize(new_len, 0);
        }
        let slot = &mut self.histogram[degree];
        *slot = slot.checked_add_signed(delta).expect("histogram underflow");
    }

    fn add_node(&mut self) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Some(Node {
            neighbors: Vec::new(),
            slot: self.alive.len(),
        }));
        self.alive.push(id);
        self.bump(0, 1);
        id
    }

    fn add_edge(&mut self, u: NodeId, v: NodeId) {
        debug_assert!(u != v && !self.has_edge(u, v));
        for (a, b) in [(u, v), (v, u)] {
            let d = self.degree(a);
            self.bump(d, -1);
            self.bump(d + 1, 1);
            self.node_mut(a).neighbors.push(b);
        }
        self.edge_count += 1;
    }

    fn remove_node(&mut self, w: NodeId) {
        let node = self.nodes[w].take().expect("live node");
        self.bump(node.neighbors.len(), -1);
        for &nb in &node.neighbors {
            let d = self.degree(nb);
            self.bump(d, -1);
            self.bump(d - 1, 1);
            let list = &mut self.node_mut(nb).neighbors;
            let pos = list.iter().position(|&x| x == w).expect("symmetric adjacency");
            list.swap_remove(pos);
        }
        self.edge_count -= node.neighbors.len();
        self.alive.swap_remove(node.slot);
        if let Some(&moved) = self.alive.get(node.slot) {
            self.node_mut(moved).slot = node.slot;
        }
        if self.last_added == Some(w) {
            self.last_added = None;
        }
    }

    /// Vertex and edge duplication from a given parent: the new node links
    /// to `parent` and to each of its neighbors independently with
    /// probability `p`.
    pub fn duplicate_from<R: Rng + ?Sized>(
        &mut self,
        parent: NodeId,
        p: f64,
        rng: &mut R,
    ) -> Result<NodeId> {
        if !self.contains(parent) {
            return Err(Error::InvalidParameter(format!("node {parent} is not in the graph")));
        }
        let snapshot = self.neighbors(parent).to_vec();
        let v = self.add_node();
        self.add_edge(parent, v);
        for nb in snapshot {
            if rng.gen::<f64>() < p {
                self.add_edge(nb, v);
            }
        }
        self.last_added = Some(v);
        Ok(v)
    }

    /// Duplication with a uniformly sampled parent. Returns `(parent, new)`.
    pub fn duplicate_step<R: Rng + ?Sized>(
        &mut self,
        p: f64,
        rng: &mut R,
    ) -> Result<(NodeId, NodeId)> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} out of range")));
        }
        let parent = self.sample_node(rng).ok_or(Error::EmptyGraph)?;
        let v = self.duplicate_from(parent, p, rng)?;
        Ok((parent, v))
    }

    /// A node may be deleted unless it was created in the current step or
    /// it is the only neighbor of some degree-1 node.
    pub fn is_deletable(&self, w: NodeId) -> bool {
        self.contains(w)
            && self.last_added != Some(w)
            && self.neighbors(w).iter().all(|&nb| self.degree(nb) > 1)
    }

    /// Removes a uniformly drawn eligible node. Ineligible draws are
    /// resampled up to `N` times; `Ok(None)` means every draw was rejected.
    pub fn delete_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<NodeId>> {
        let n = self.node_count();
        if n < 2 {
            return Err(Error::GraphTooSmall(format!("deletion needs 2 nodes, have {n}")));
        }
        for _ in 0..n {
            let w = self.alive[rng.gen_range(0..n)];
            if self.is_deletable(w) {
                self.remove_node(w);
                return Ok(Some(w));
            }
        }
        Ok(None)
    }

    /// `g(i) = f(i) / N` over degrees `1..=max_degree` (at least one bin).
    pub fn empirical_distribution<T: Scalar>(&self) -> DegreeDistribution<T> {
        let n = self.node_count();
        assert!(n >= 1, "empirical distribution of an empty graph");
        debug_assert_eq!(self.histogram.first().copied().unwrap_or(0), 0, "isolated node");
        let top = self.max_degree().max(1);
        let inv = T::one() / T::of_usize(n);
        let mass = (1..=top)
            .map(|i| T::of_usize(self.histogram.get(i).copied().unwrap_or(0)) * inv)
            .collect();
        DegreeDistribution::from_raw(mass)
    }

    /// Size of the largest connected component over `N`, by BFS.
    pub fn largest_component_fraction(&self) -> f64 {
        let n = self.node_count();
        if n == 0 {
            return 0.0;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        let mut best = 0usize;
        for &start in &self.alive {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut size = 0;
            while let Some(u) = queue.pop_front() {
                size += 1;
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            best = best.max(size);
        }
        best as f64 / n as f64
    }

    /// Histogram rebuilt from scratch, trimmed of trailing zeros.
    pub fn recount_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.max_degree_by_scan() + 1];
        for &id in &self.alive {
            h[self.degree(id)] += 1;
        }
        h
    }

    fn max_degree_by_scan(&self) -> usize {
        self.alive.iter().map(|&id| self.degree(id)).max().unwrap_or(0)
    }

    /// Full structural check; returns a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut edge_ends = 0usize;
        for (slot, &u) in self.alive.iter().enumerate() {
            let node = self.nodes.get(u).and_then(Option::as_ref).ok_or(format!("dangling id {u}"))?;
            if node.slot != slot {
                return Err(format!("node {u} has slot {} but sits at {slot}", node.slot));
            }
            for (k, &v) in node.neighbors.iter().enumerate() {
                if v == u {
                    return Err(format!("self-loop at {u}"));
                }
                if !self.contains(v) {
                    return Err(format!("edge {u}-{v} to a deleted node"));
                }
                if node.neighbors[..k].contains(&v) {
                    return Err(format!("multi-edge {u}-{v}"));
                }
                if !self.neighbors(v).contains(&u) {
                    return Err(format!("asymmetric edge {u}-{v}"));
                }
            }
            edge_ends += node.neighbors.len();
        }
        if edge_ends != 2 * self.edge_count {
            return Err(format!("edge count {} but {} endpoints", self.edge_count, edge_ends));
        }
        let live = self.nodes.iter().filter(|n| n.is_some()).count();
        if live != self.alive.len() {
            return Err(format!("{live} live slots but {} alive ids", self.alive.len()));
        }
        let total: usize = self.histogram.iter().sum();
        if total != self.node_count() {
            return Err(format!("histogram sums to {total}, N = {}", self.node_count()));
        }
        let recount = self.recount_histogram();
        let trimmed = &self.histogram[..self.histogram.len().min(recount.len().max(1))];
        if self.histogram[trimmed.len()..].iter().any(|&c| c != 0) || trimmed != &recount[..trimmed.len()] {
            return Err(format!("histogram {:?} != recount {:?}", self.histogram, recount));
        }
        Ok(())
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for &u in &self.alive {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Snapshot text: a JSON header line then one `u v` pair per line.
    pub fn snapshot_text(&self, step: u64) -> String {
        let mut s = serde_json::json!({ "N": self.node_count(), "step": step }).to_string();
        s.push('\n');
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Parses an edge list. Lines starting with `#` or `{` are skipped, so
    /// snapshots can be read back. Ids are compacted to `0..n` in sorted
    /// order.
    pub fn read_edge_list<B: BufRead>(reader: B) -> Result<Self> {
        let mut raw = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with('{') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: lineno + 1,
                column: 1,
                message: msg.to_string(),
            };
            let mut it = t.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| parse_err("expected `u v` node ids"))?;
            let v: usize = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| parse_err("expected `u v` node ids"))?;
            if it.next().is_some() {
                return Err(parse_err("trailing fields"));
            }
            raw.push((u, v));
        }
        let mut ids: Vec<usize> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
        ids.sort_unstable();
        ids.dedup();
        let index = |x: usize| ids.binary_search(&x).expect("collected id");
        let edges: Vec<_> = raw.iter().map(|&(u, v)| (index(u), index(v))).collect();
        Self::from_edges(ids.len(), &edges)
    }

    pub fn read_edge_list_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(f))
    }
}

/// One step of the modulated dynamics in state `theta`:
/// duplication with probability `r`, then with probability `q(theta)` a
/// deletion followed by a replacement duplication.
pub fn evolve_step<R: Rng + ?Sized>(
    graph: &mut DynamicGraph,
    params: &GraphParams,
    theta: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    let (p, q) = match (params.p.get(theta), params.q.get(theta)) {
        (Some(&p), Some(&q)) => (p, q),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "state {theta} out of range for {} states",
                params.states()
            )))
        }
    };
    graph.set_last_added(None);
    let mut out = StepOutcome::default();
    if rng.gen::<f64>() < params.r {
        let (parent, v) = graph.duplicate_step(p, rng)?;
        out.duplicated = true;
        out.parent_node = Some(parent);
        out.new_node = Some(v);
    }
    if rng.gen::<f64>() < q {
        match graph.delete_step(rng)? {
            Some(w) => {
                out.deleted = true;
                out.deleted_node = Some(w);
                let (_, v) = graph.duplicate_step(p, rng)?;
                out.replacement_node = Some(v);
            }
            None => out.deletion_skipped = true,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn duplicating_edge_endpoint_with_p_one_gives_triangle() {
        let mut g = DynamicGraph::single_edge();
        g.duplicate_from(0, 1.0, &mut rng(1)).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.degree_histogram()[2], 3);
        g.check_invariants().unwrap();
    }

    #[test]
    fn duplicating_lonely_node_gives_one_edge() {
        let mut g = DynamicGraph::from_edges(1, &[]).unwrap();
        let (parent, v) = g.duplicate_step(0.3, &mut rng(2)).unwrap();
        assert_eq!(parent, 0);
        assert!(g.has_edge(0, v));
        assert_eq!(g.degree_histogram()[1], 2);
        assert_eq!(g.last_added(), Some(v));
    }

    #[test]
    fn empty_graph_cannot_duplicate() {
        let mut g = DynamicGraph::new();
        let err = g.duplicate_step(0.5, &mut rng(0)).unwrap_err();
        assert_eq!(err.to_string(), "cannot duplicate on empty graph");
    }

    #[test]
    fn star_hub_is_protected() {
        let mut g = DynamicGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(!g.is_deletable(0));
        let mut r = rng(3);
        for _ in 0..20 {
            let mut h = g.clone();
            let w = h.delete_step(&mut r).unwrap().unwrap();
            assert_ne!(w, 0);
        }
        g.delete_step(&mut r).unwrap();
        g.check_invariants().unwrap();
    }

    #[test]
    fn last_added_is_immune() {
        let g = DynamicGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut r = rng(4);
        let mut counts = [0usize; 3];
        for _ in 0..2000 {
            let mut h = g.clone();
            h.set_last_added(Some(0));
            // all three draws can land on the immune node
            if let Some(w) = h.delete_step(&mut r).unwrap() {
                counts[w] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        assert!(counts[1] > 900 && counts[2] > 900, "{counts:?}");
    }

    #[test]
    fn single_edge_deletion_is_skipped() {
        let mut g = DynamicGraph::single_edge();
        assert_eq!(g.delete_step(&mut rng(5)).unwrap(), None);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn deletion_needs_two_nodes() {
        let mut g = DynamicGraph::from_edges(1, &[]).unwrap();
        assert!(matches!(g.delete_step(&mut rng(0)), Err(Error::GraphTooSmall(_))));
    }

    #[test]
    fn idle_step_changes_nothing() {
        let mut g = DynamicGraph::cycle(6).unwrap();
        let before = g.edges();
        let params = GraphParams::single(0.0, 0.5, 0.0);
        let out = evolve_step(&mut g, &params, 0, &mut rng(6)).unwrap();
        assert_eq!(out, StepOutcome::default());
        assert_eq!(g.edges(), before);
    }

    #[test]
    fn pure_growth_adds_one_node_per_step() {
        let mut g = DynamicGraph::single_edge();
        let params = GraphParams::single(1.0, 0.5, 0.0);
        let mut r = rng(7);
        for n in 1..=200 {
            evolve_step(&mut g, &params, 0, &mut r).unwrap();
            assert_eq!(g.node_count(), n + 2);
        }
        g.check_invariants().unwrap();
    }

    #[test]
    fn bad_state_index_is_an_error() {
        let mut g = DynamicGraph::cycle(4).unwrap();
        let params = GraphParams::single(0.0, 0.5, 0.1);
        assert!(evolve_step(&mut g, &params, 1, &mut rng(0)).is_err());
    }

    #[test]
    fn star_distribution_and_handshake() {
        let g = DynamicGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let d = g.empirical_distribution::<f64>();
        assert_eq!(d.mass(), &[0.75, 0.0, 0.25]);
        let mean: f64 = d.mass().iter().enumerate().map(|(i, m)| (i + 1) as f64 * m).sum();
        assert!((mean - 2.0 * g.edge_count() as f64 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_is_all_degree_two() {
        let g = DynamicGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(g.empirical_distribution::<f64>().at(2), 1.0);
    }

    #[test]
    fn component_fractions() {
        let connected = DynamicGraph::cycle(5).unwrap();
        assert_eq!(connected.largest_component_fraction(), 1.0);
        let two = DynamicGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
            .unwrap();
        assert_eq!(two.largest_component_fraction(), 0.5);
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(DynamicGraph::from_edges(2, &[(0, 0)]).is_err());
        assert!(DynamicGraph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(DynamicGraph::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn edge_list_parse_errors_carry_line_numbers() {
        let text = "0 1\n1 x\n";
        match DynamicGraph::read_edge_list(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_reads_back() {
        let mut g = DynamicGraph::cycle(5).unwrap();
        let params = GraphParams::single(0.0, 0.4, 1.0);
        let mut r = rng(8);
        for _ in 0..30 {
            evolve_step(&mut g, &params, 0, &mut r).unwrap();
        }
        let text = g.snapshot_text(30);
        assert!(text.starts_with("{\"N\":5,\"step\":30}"));
        let back = DynamicGraph::read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(back.node_count(), 5);
        assert_eq!(back.edge_count(), g.edge_count());
        assert_eq!(back.recount_histogram(), g.recount_histogram());
    }
}
