//! Directed acyclic networks of qudits.
//!
//! A broadcast network is a DAG whose vertices carry qudits. Sink vertices
//! (no outgoing arrows) hold the payload state; every other vertex gets a
//! dimension fixed by its direct successors:
//!
//! ```text
//! d(v) - 1 = sum over arrows v->w of (d(w) - 1)
//! ```
//!
//! [`assign_dims`] evaluates this recursion from the sinks upward, so only
//! sink dimensions are ever chosen by the caller. The other operations here
//! (topological order, reachability, path counting) are the classical
//! bookkeeping the protocol layers are built on.

use std::collections::{BinaryHeap, BTreeMap, BTreeSet};
use std::cmp::Reverse;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Index of a vertex within a network. Dense in `0..vertex_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A directed arrow from `tail` to `head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
}

impl Edge {
    pub fn new(tail: usize, head: usize) -> Self {
        Edge { tail: VertexId(tail), head: VertexId(head) }
    }
}

/// A bare directed graph: vertex count plus arrows, no dimensions yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    vertex_count: usize,
    edges: Vec<Edge>,
}

impl Topology {
    /// Builds a topology, rejecting out-of-range ids, self-loops, and
    /// parallel edges. Acyclicity is not checked here; it surfaces through
    /// [`Topology::topo_sort`].
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for &(tail, head) in edges {
            if tail >= vertex_count {
                return Err(Error::UnknownVertex(VertexId(tail)));
            }
            if head >= vertex_count {
                return Err(Error::UnknownVertex(VertexId(head)));
            }
            if tail == head {
                return Err(Error::SelfLoop(VertexId(tail)));
            }
            if !seen.insert((tail, head)) {
                return Err(Error::DuplicateEdge(VertexId(tail), VertexId(head)));
            }
            out.push(Edge::new(tail, head));
        }
        Ok(Topology { vertex_count, edges: out })
    }

    /// Open chain `0 -> 1 -> ... -> n-1`.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<Edge> = (0..n.saturating_sub(1)).map(|i| Edge::new(i, i + 1)).collect();
        Topology { vertex_count: n, edges }
    }

    /// One hub (vertex 0) with arrows to `fan` leaves `1..=fan`.
    pub fn star(fan: usize) -> Self {
        let edges: Vec<Edge> = (1..=fan).map(|i| Edge::new(0, i)).collect();
        Topology { vertex_count: fan + 1, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_count).map(VertexId)
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 < self.vertex_count {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Direct successors of `v` (heads of arrows leaving `v`).
    pub fn children(&self, v: VertexId) -> Vec<VertexId> {
        self.edges.iter().filter(|e| e.tail == v).map(|e| e.head).collect()
    }

    /// Direct predecessors of `v` (tails of arrows entering `v`).
    pub fn parents(&self, v: VertexId) -> Vec<VertexId> {
        self.edges.iter().filter(|e| e.head == v).map(|e| e.tail).collect()
    }

    /// Vertices with no outgoing arrows.
    pub fn sinks(&self) -> BTreeSet<VertexId> {
        let mut out: BTreeSet<VertexId> = self.vertices().collect();
        for e in &self.edges {
            out.remove(&e.tail);
        }
        out
    }

    /// Vertices with no incoming arrows.
    pub fn sources(&self) -> BTreeSet<VertexId> {
        let mut out: BTreeSet<VertexId> = self.vertices().collect();
        for e in &self.edges {
            out.remove(&e.head);
        }
        out
    }

    /// Kahn's algorithm; ties broken by ascending id so the order is
    /// deterministic. Fails with [`Error::CycleDetected`] on cyclic input.
    pub fn topo_sort(&self) -> Result<Vec<VertexId>> {
        let mut in_deg = vec![0usize; self.vertex_count];
        for e in &self.edges {
            in_deg[e.head.0] += 1;
        }
        let mut ready: BinaryHeap<Reverse<usize>> = in_deg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.vertex_count);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(VertexId(v));
            for e in self.edges.iter().filter(|e| e.tail.0 == v) {
                in_deg[e.head.0] -= 1;
                if in_deg[e.head.0] == 0 {
                    ready.push(Reverse(e.head.0));
                }
            }
        }
        if order.len() == self.vertex_count {
            Ok(order)
        } else {
            Err(Error::CycleDetected)
        }
    }

    /// All vertices reachable from `x` (`succ`) and all vertices that can
    /// reach `x` (`pred`), each by at least one arrow. `x` itself is in
    /// neither set.
    pub fn reach(&self, x: VertexId) -> Result<(BTreeSet<VertexId>, BTreeSet<VertexId>)> {
        self.check_vertex(x)?;
        Ok((self.closure(x, false), self.closure(x, true)))
    }

    fn closure(&self, x: VertexId, reversed: bool) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![x];
        while let Some(v) = stack.pop() {
            let next = if reversed { self.parents(v) } else { self.children(v) };
            for w in next {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.remove(&x);
        seen
    }

    /// Number of distinct directed paths from `from` to `to`. Paths from a
    /// vertex to itself count as zero.
    pub fn count_paths(&self, from: VertexId, to: VertexId) -> Result<u64> {
        self.check_vertex(from)?;
        self.check_vertex(to)?;
        if from == to {
            return Ok(0);
        }
        Ok(self.path_counts_to(to)?[from.0])
    }

    /// For a fixed target, the number of directed paths from every vertex.
    /// The entry at the target itself is 1 (the empty path), which is what
    /// the recurrence `n(u) = sum over arrows u->x of n(x)` needs; external
    /// callers subtract it via [`Topology::count_paths`].
    pub fn path_counts_to(&self, to: VertexId) -> Result<Vec<u64>> {
        self.check_vertex(to)?;
        let order = self.topo_sort()?;
        let mut counts = vec![0u64; self.vertex_count];
        counts[to.0] = 1;
        for &v in order.iter().rev() {
            if v == to {
                continue;
            }
            counts[v.0] = self.children(v).iter().map(|w| counts[w.0]).sum();
        }
        Ok(counts)
    }
}

/// A topology together with the per-vertex qudit dimension d(v).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagNetwork {
    topology: Topology,
    dims: Vec<usize>,
}

/// Computes non-sink dimensions from the sink assignment, walking the
/// reverse topological order. Every sink must appear in `sink_dims` with a
/// value of at least 2.
pub fn assign_dims(topology: Topology, sink_dims: &BTreeMap<VertexId, usize>) -> Result<DagNetwork> {
    let order = topology.topo_sort()?;
    let sinks = topology.sinks();
    let mut dims = vec![0usize; topology.vertex_count()];
    for &v in order.iter().rev() {
        if sinks.contains(&v) {
            let d = *sink_dims.get(&v).ok_or(Error::MissingSinkDim(v))?;
            if d < 2 {
                return Err(Error::InvalidDimension { dim: d });
            }
            dims[v.0] = d;
        } else {
            let excess: usize = topology.children(v).iter().map(|w| dims[w.0] - 1).sum();
            dims[v.0] = 1 + excess;
        }
    }
    Ok(DagNetwork { topology, dims })
}

impl DagNetwork {
    /// Wraps explicit dimensions without recomputing them. Used to build
    /// deliberately broken networks for validation tests; well-formed
    /// networks come from [`assign_dims`].
    pub fn with_dims(topology: Topology, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != topology.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: topology.vertex_count(),
                got: dims.len(),
            });
        }
        Ok(DagNetwork { topology, dims })
    }

    /// Open chain of `n` vertices whose single sink has dimension
    /// `sink_dim`; every vertex then shares that dimension.
    pub fn chain(n: usize, sink_dim: usize) -> Result<Self> {
        let topo = Topology::chain(n);
        let sink_dims = topo.sinks().into_iter().map(|v| (v, sink_dim)).collect();
        assign_dims(topo, &sink_dims)
    }

    /// One hub broadcasting to `fan` sinks of dimension `sink_dim`.
    pub fn star(fan: usize, sink_dim: usize) -> Result<Self> {
        let topo = Topology::star(fan);
        let sink_dims = topo.sinks().into_iter().map(|v| (v, sink_dim)).collect();
        assign_dims(topo, &sink_dims)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn vertex_count(&self) -> usize {
        self.topology.vertex_count()
    }

    pub fn edges(&self) -> &[Edge] {
        self.topology.edges()
    }

    pub fn dim(&self, v: VertexId) -> usize {
        self.dims[v.0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn sinks(&self) -> BTreeSet<VertexId> {
        self.topology.sinks()
    }

    pub fn sources(&self) -> BTreeSet<VertexId> {
        self.topology.sources()
    }

    pub fn is_sink(&self, v: VertexId) -> bool {
        self.topology.sinks().contains(&v)
    }

    /// Non-sink vertices in ascending id order.
    pub fn non_sinks(&self) -> Vec<VertexId> {
        let sinks = self.sinks();
        self.topology.vertices().filter(|v| !sinks.contains(v)).collect()
    }

    pub fn children(&self, v: VertexId) -> Vec<VertexId> {
        self.topology.children(v)
    }

    pub fn parents(&self, v: VertexId) -> Vec<VertexId> {
        self.topology.parents(v)
    }

    pub fn topo_sort(&self) -> Result<Vec<VertexId>> {
        self.topology.topo_sort()
    }

    pub fn count_paths(&self, from: VertexId, to: VertexId) -> Result<u64> {
        self.topology.count_paths(from, to)
    }

    /// All violations of the network invariants: acyclicity, dimensions at
    /// least 2, and the dimension recursion at every non-sink. Returns an
    /// empty list for valid networks.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.topology.topo_sort().is_err() {
            violations.push("not acyclic".to_string());
            return violations;
        }
        for v in self.topology.vertices() {
            if self.dims[v.0] < 2 {
                violations.push(format!("dimension {} at {} below 2", self.dims[v.0], v));
            }
        }
        let sinks = self.sinks();
        for v in self.topology.vertices() {
            if sinks.contains(&v) {
                continue;
            }
            let excess: usize = self.children(v).iter().map(|w| self.dims[w.0] - 1).sum();
            if self.dims[v.0] != 1 + excess {
                violations.push(format!(
                    "dimension recursion broken at {}: d={} but successors give {}",
                    v,
                    self.dims[v.0],
                    1 + excess
                ));
            }
        }
        violations
    }

    /// Errors with [`Error::InvalidNetwork`] unless [`DagNetwork::validate`]
    /// is clean.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(violations))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Topology {
        // u=0 -> a=1, u -> b=2, a -> v=3, b -> v
        Topology::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn topo_sort_chain_is_unique() {
        let t = Topology::chain(3);
        let order = t.topo_sort().unwrap();
        assert_eq!(order, vec![VertexId(0), VertexId(1), VertexId(2)]);
    }

    #[test]
    fn topo_sort_diamond_breaks_ties_by_id() {
        let order = diamond().topo_sort().unwrap();
        assert_eq!(order, vec![VertexId(0), VertexId(1), VertexId(2), VertexId(3)]);
    }

    #[test]
    fn topo_sort_rejects_two_cycle() {
        let t = Topology::new(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(t.topo_sort(), Err(Error::CycleDetected));
    }

    #[test]
    fn sinks_and_sources() {
        let t = Topology::chain(3);
        assert_eq!(t.sinks().into_iter().collect::<Vec<_>>(), vec![VertexId(2)]);
        assert_eq!(t.sources().into_iter().collect::<Vec<_>>(), vec![VertexId(0)]);

        let isolated = Topology::new(1, &[]).unwrap();
        assert!(isolated.sinks().contains(&VertexId(0)));
        assert!(isolated.sources().contains(&VertexId(0)));

        let star = Topology::star(2);
        assert_eq!(star.sinks().len(), 2);
        assert_eq!(star.sources().into_iter().collect::<Vec<_>>(), vec![VertexId(0)]);
    }

    #[test]
    fn reach_chain_and_diamond() {
        let t = Topology::chain(3);
        let (succ, _) = t.reach(VertexId(0)).unwrap();
        assert_eq!(succ, [VertexId(1), VertexId(2)].into_iter().collect());
        let (_, pred) = t.reach(VertexId(2)).unwrap();
        assert_eq!(pred, [VertexId(0), VertexId(1)].into_iter().collect());

        let (_, pred) = diamond().reach(VertexId(3)).unwrap();
        assert_eq!(pred, [VertexId(0), VertexId(1), VertexId(2)].into_iter().collect());
        assert!(diamond().reach(VertexId(9)).is_err());
    }

    #[test]
    fn count_paths_examples() {
        let t = Topology::chain(3);
        assert_eq!(t.count_paths(VertexId(0), VertexId(2)).unwrap(), 1);
        assert_eq!(t.count_paths(VertexId(2), VertexId(0)).unwrap(), 0);
        assert_eq!(t.count_paths(VertexId(1), VertexId(1)).unwrap(), 0);
        assert_eq!(diamond().count_paths(VertexId(0), VertexId(3)).unwrap(), 2);
    }

    /// Exhaustive path enumeration, independent of the DP in
    /// `path_counts_to`.
    fn enumerate_paths(t: &Topology, from: VertexId, to: VertexId) -> u64 {
        fn walk(t: &Topology, at: VertexId, to: VertexId) -> u64 {
            if at == to {
                return 1;
            }
            t.children(at).iter().map(|&w| walk(t, w, to)).sum()
        }
        if from == to {
            0
        } else {
            walk(t, from, to)
        }
    }

    #[test]
    fn count_paths_matches_enumeration_on_small_graphs() {
        // All DAGs on 5 vertices with edges only from lower to higher ids,
        // over a few deterministic edge masks.
        let all_edges: Vec<(usize, usize)> =
            (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        for mask in (0..1u32 << all_edges.len()).step_by(97) {
            let chosen: Vec<(usize, usize)> = all_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let t = Topology::new(5, &chosen).unwrap();
            // The order is a permutation respecting every edge.
            let order = t.topo_sort().unwrap();
            let mut position = vec![0usize; 5];
            let mut sorted: Vec<usize> = order.iter().map(|v| v.0).collect();
            for (i, v) in order.iter().enumerate() {
                position[v.0] = i;
            }
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
            for e in t.edges() {
                assert!(position[e.tail.0] < position[e.head.0], "mask {mask}");
            }
            for u in 0..5 {
                for v in 0..5 {
                    assert_eq!(
                        t.count_paths(VertexId(u), VertexId(v)).unwrap(),
                        enumerate_paths(&t, VertexId(u), VertexId(v)),
                        "mask {mask} u {u} v {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn assign_dims_star_and_chain() {
        let star = DagNetwork::star(2, 2).unwrap();
        assert_eq!(star.dim(VertexId(0)), 3);

        let chain = DagNetwork::chain(5, 2).unwrap();
        assert!(chain.dims().iter().all(|&d| d == 2));
    }

    #[test]
    fn assign_dims_two_level_tree() {
        // r=0 -> a=1, r -> b=2; a -> 3, a -> 4; b -> 5. Sinks are qubits.
        let topo = Topology::new(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        let sink_dims = [3, 4, 5].iter().map(|&v| (VertexId(v), 2)).collect();
        let g = assign_dims(topo, &sink_dims).unwrap();
        assert_eq!(g.dim(VertexId(1)), 3);
        assert_eq!(g.dim(VertexId(2)), 2);
        assert_eq!(g.dim(VertexId(0)), 4);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn assign_dims_missing_sink_errors() {
        let topo = Topology::star(2);
        let partial: BTreeMap<VertexId, usize> = [(VertexId(1), 2)].into_iter().collect();
        assert_eq!(assign_dims(topo, &partial), Err(Error::MissingSinkDim(VertexId(2))));
    }

    #[test]
    fn validate_reports_all_violations() {
        let ok = DagNetwork::star(2, 2).unwrap();
        assert!(ok.validate().is_empty());

        let broken = DagNetwork::with_dims(Topology::star(2), vec![2, 2, 2]).unwrap();
        let violations = broken.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("recursion broken at v0"));

        let cyclic = DagNetwork::with_dims(
            Topology::new(2, &[(0, 1), (1, 0)]).unwrap(),
            vec![2, 2],
        )
        .unwrap();
        assert_eq!(cyclic.validate(), vec!["not acyclic".to_string()]);
    }

    #[test]
    fn dims_monotone_toward_sinks() {
        let topo = Topology::new(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        let sink_dims = [3, 4, 5].iter().map(|&v| (VertexId(v), 2)).collect();
        let g = assign_dims(topo, &sink_dims).unwrap();
        for e in g.edges() {
            assert!(g.dim(e.tail) >= g.dim(e.head));
        }
        // Branching vertices strictly dominate each child.
        for v in g.topology().vertices() {
            let children = g.children(v);
            if children.len() >= 2 {
                for w in children {
                    assert!(g.dim(v) > g.dim(w));
                }
            }
        }
    }
}
