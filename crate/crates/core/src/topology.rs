//! Client graph and the honest/Byzantine partition.
//!
//! Edges are ordered pairs `(u, v)` meaning `u` sends to `v`; the
//! neighborhood of `v` is its in-neighborhood `{u | (u, v) in E}`. All
//! generators emit symmetric edge sets.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Index of a client in `[0, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ClientId(pub usize);

impl ClientId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Graph generator.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Complete,
    /// Bidirectional ring `i <-> i+1 (mod V)`.
    Ring,
    /// Explicit edge list; every pair is added in both directions.
    Custom(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub clients: usize,
    pub byzantine: usize,
    /// Explicit Byzantine ids. `None` selects the lowest `byzantine` indices.
    pub byzantine_ids: Option<Vec<usize>>,
}

impl TopologySpec {
    pub fn complete(clients: usize, byzantine: usize) -> Self {
        Self {
            kind: TopologyKind::Complete,
            clients,
            byzantine,
            byzantine_ids: None,
        }
    }

    pub fn ring(clients: usize, byzantine: usize) -> Self {
        Self {
            kind: TopologyKind::Ring,
            clients,
            byzantine,
            byzantine_ids: None,
        }
    }

    pub fn with_byzantine_ids(mut self, ids: Vec<usize>) -> Self {
        self.byzantine = ids.len();
        self.byzantine_ids = Some(ids);
        self
    }
}

impl Default for TopologySpec {
    /// 45 clients on a complete graph, 30 of them Byzantine.
    fn default() -> Self {
        Self::complete(45, 30)
    }
}

/// Directed client graph with an honest/Byzantine partition. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    num_clients: usize,
    edges: BTreeSet<(ClientId, ClientId)>,
    in_neighbors: Vec<Vec<ClientId>>,
    out_neighbors: Vec<Vec<ClientId>>,
    is_byzantine: Vec<bool>,
    honest: Vec<ClientId>,
    byzantine: Vec<ClientId>,
    honest_rank: Vec<Option<usize>>,
}

/// Builds a topology from a generator spec.
pub fn build_topology(spec: &TopologySpec) -> Result<GraphTopology> {
    let n = spec.clients;
    if n < 2 {
        return Err(Error::TooFewClients(n));
    }
    if spec.byzantine >= n {
        return Err(Error::TooManyByzantine {
            byzantine: spec.byzantine,
            clients: n,
        });
    }
    let byzantine: Vec<usize> = match &spec.byzantine_ids {
        Some(ids) => {
            if ids.len() != spec.byzantine {
                return Err(crate::error::invalid(
                    "byzantine_ids",
                    alloc::format!(
                        "lists {} ids but the byzantine count is {}",
                        ids.len(),
                        spec.byzantine
                    ),
                ));
            }
            ids.clone()
        }
        None => (0..spec.byzantine).collect(),
    };

    let mut pairs = Vec::new();
    match &spec.kind {
        TopologyKind::Complete => {
            for u in 0..n {
                for v in 0..n {
                    if u != v {
                        pairs.push((u, v));
                    }
                }
            }
        }
        TopologyKind::Ring => {
            for i in 0..n {
                let j = (i + 1) % n;
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
        TopologyKind::Custom(list) => {
            for &(u, v) in list {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
    }
    GraphTopology::from_parts(n, &pairs, &byzantine)
}

impl GraphTopology {
    /// Builds a topology from explicit directed edges and Byzantine ids,
    /// validating every invariant.
    pub fn from_parts(num_clients: usize, edges: &[(usize, usize)], byzantine: &[usize]) -> Result<Self> {
        if num_clients < 2 {
            return Err(Error::TooFewClients(num_clients));
        }
        if byzantine.len() >= num_clients {
            return Err(Error::TooManyByzantine {
                byzantine: byzantine.len(),
                clients: num_clients,
            });
        }
        let mut is_byzantine = vec![false; num_clients];
        for &b in byzantine {
            if b >= num_clients {
                return Err(Error::UnknownClient(b));
            }
            if is_byzantine[b] {
                return Err(crate::error::invalid("byzantine_ids", alloc::format!("duplicate id {b}")));
            }
            is_byzantine[b] = true;
        }

        let mut edge_set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= num_clients || v >= num_clients || u == v {
                return Err(Error::InvalidEdge(u, v));
            }
            edge_set.insert((ClientId(u), ClientId(v)));
        }

        let mut in_neighbors = vec![Vec::new(); num_clients];
        let mut out_neighbors = vec![Vec::new(); num_clients];
        // BTreeSet iteration is sorted by (sender, receiver), so every
        // neighbor list comes out sorted by id.
        for &(u, v) in &edge_set {
            in_neighbors[v.0].push(u);
            out_neighbors[u.0].push(v);
        }

        let mut honest = Vec::new();
        let mut byz = Vec::new();
        let mut honest_rank = vec![None; num_clients];
        for (i, &b) in is_byzantine.iter().enumerate() {
            if b {
                byz.push(ClientId(i));
            } else {
                honest_rank[i] = Some(honest.len());
                honest.push(ClientId(i));
            }
        }

        let g = Self {
            num_clients,
            edges: edge_set,
            in_neighbors,
            out_neighbors,
            is_byzantine,
            honest,
            byzantine: byz,
            honest_rank,
        };
        if !honest_subgraph_connected(&g) {
            return Err(Error::HonestSubgraphDisconnected);
        }
        Ok(g)
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn edges(&self) -> impl Iterator<Item = (ClientId, ClientId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: ClientId, to: ClientId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn contains(&self, v: ClientId) -> bool {
        v.0 < self.num_clients
    }

    pub fn honest(&self) -> &[ClientId] {
        &self.honest
    }

    pub fn byzantine(&self) -> &[ClientId] {
        &self.byzantine
    }

    pub fn is_byzantine(&self, v: ClientId) -> bool {
        self.is_byzantine.get(v.0).copied().unwrap_or(false)
    }

    pub fn is_honest(&self, v: ClientId) -> bool {
        self.contains(v) && !self.is_byzantine[v.0]
    }

    /// Position of `v` among honest clients (sorted by id).
    pub fn honest_rank(&self, v: ClientId) -> Option<usize> {
        self.honest_rank.get(v.0).copied().flatten()
    }

    /// In-neighborhood of `v`, sorted by id.
    pub fn neighbors(&self, v: ClientId) -> Result<&[ClientId]> {
        self.in_neighbors
            .get(v.0)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownClient(v.0))
    }

    /// Clients that receive messages from `v`, sorted by id.
    pub fn out_neighbors(&self, v: ClientId) -> Result<&[ClientId]> {
        self.out_neighbors
            .get(v.0)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownClient(v.0))
    }

    /// Undirected honest-honest edges `(v, u)` with `v < u`.
    pub fn honest_edges(&self) -> Vec<(ClientId, ClientId)> {
        self.edges
            .iter()
            .filter(|(u, v)| u < v && self.is_honest(*u) && self.is_honest(*v))
            .copied()
            .collect()
    }

    /// The subgraph induced by honest clients, relabeled to `0..V_h` in
    /// honest-rank order, with no Byzantine clients.
    pub fn honest_subgraph(&self) -> Result<GraphTopology> {
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(u, v)| Some((self.honest_rank(u)?, self.honest_rank(v)?)))
            .collect();
        GraphTopology::from_parts(self.honest.len(), &edges, &[])
    }
}

/// Whether the honest-induced subgraph is connected, treating edges as
/// undirected. A single honest client is connected.
pub fn honest_subgraph_connected(g: &GraphTopology) -> bool {
    let Some(&start) = g.honest.first() else {
        return true;
    };
    let mut seen = vec![false; g.num_clients];
    let mut queue = VecDeque::new();
    seen[start.0] = true;
    queue.push_back(start);
    let mut reached = 1usize;
    while let Some(v) = queue.pop_front() {
        for &u in g.in_neighbors[v.0].iter().chain(&g.out_neighbors[v.0]) {
            if !g.is_byzantine[u.0] && !seen[u.0] {
                seen[u.0] = true;
                reached += 1;
                queue.push_back(u);
            }
        }
    }
    reached == g.honest.len()
}

/// Free-function form of [`GraphTopology::neighbors`].
pub fn neighbors(g: &GraphTopology, v: ClientId) -> Result<&[ClientId]> {
    g.neighbors(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<ClientId> {
        v.iter().copied().map(ClientId).collect()
    }

    #[test]
    fn default_sized_complete_graph() {
        let g = build_topology(&TopologySpec::complete(45, 30)).unwrap();
        assert_eq!(g.num_clients(), 45);
        assert_eq!(g.byzantine().len(), 30);
        assert_eq!(g.honest().len(), 15);
        assert_eq!(g.byzantine()[0], ClientId(0));
        assert_eq!(g.honest()[0], ClientId(30));
        for v in 0..45 {
            assert_eq!(g.neighbors(ClientId(v)).unwrap().len(), 44);
        }
        assert!(honest_subgraph_connected(&g));
    }

    #[test]
    fn smallest_graph() {
        let g = build_topology(&TopologySpec::complete(2, 0)).unwrap();
        let e: Vec<_> = g.edges().collect();
        assert_eq!(e, vec![(ClientId(0), ClientId(1)), (ClientId(1), ClientId(0))]);
    }

    #[test]
    fn ring_with_split_honest_set_is_rejected() {
        let spec = TopologySpec::ring(4, 2).with_byzantine_ids(vec![1, 3]);
        assert_eq!(build_topology(&spec), Err(Error::HonestSubgraphDisconnected));
    }

    #[test]
    fn too_many_byzantine() {
        assert!(matches!(
            build_topology(&TopologySpec::complete(4, 4)),
            Err(Error::TooManyByzantine { .. })
        ));
        assert_eq!(build_topology(&TopologySpec::complete(1, 0)), Err(Error::TooFewClients(1)));
    }

    #[test]
    fn connectivity_cases() {
        // Single honest client.
        let g = build_topology(&TopologySpec::complete(3, 2)).unwrap();
        assert!(honest_subgraph_connected(&g));
        // Two honest clients joined only through a Byzantine one.
        let r = GraphTopology::from_parts(3, &[(0, 1), (1, 0), (1, 2), (2, 1)], &[1]);
        assert_eq!(r, Err(Error::HonestSubgraphDisconnected));
    }

    #[test]
    fn neighbor_queries() {
        let g = build_topology(&TopologySpec::complete(3, 0)).unwrap();
        assert_eq!(g.neighbors(ClientId(0)).unwrap(), &ids(&[1, 2])[..]);
        let ring = build_topology(&TopologySpec::ring(4, 0)).unwrap();
        assert_eq!(ring.neighbors(ClientId(0)).unwrap(), &ids(&[1, 3])[..]);
        let two = build_topology(&TopologySpec::complete(2, 0)).unwrap();
        assert_eq!(two.neighbors(ClientId(1)).unwrap(), &ids(&[0])[..]);
        assert_eq!(two.neighbors(ClientId(5)), Err(Error::UnknownClient(5)));
    }

    #[test]
    fn custom_edges_are_symmetrized() {
        let spec = TopologySpec {
            kind: TopologyKind::Custom(vec![(0, 1), (1, 2)]),
            clients: 3,
            byzantine: 0,
            byzantine_ids: None,
        };
        let g = build_topology(&spec).unwrap();
        assert!(g.has_edge(ClientId(1), ClientId(0)));
        assert!(g.has_edge(ClientId(2), ClientId(1)));
        assert!(!g.has_edge(ClientId(0), ClientId(2)));
        let bad = TopologySpec {
            kind: TopologyKind::Custom(vec![(0, 0)]),
            ..spec
        };
        assert_eq!(build_topology(&bad), Err(Error::InvalidEdge(0, 0)));
    }

    #[test]
    fn neighbor_lists_match_edges() {
        let g = build_topology(&TopologySpec::ring(7, 2)).unwrap();
        for v in 0..7 {
            for u in 0..7 {
                let listed = g.neighbors(ClientId(v)).unwrap().contains(&ClientId(u));
                assert_eq!(listed, g.has_edge(ClientId(u), ClientId(v)));
            }
        }
    }

    #[test]
    fn honest_subgraph_relabels_in_rank_order() {
        let g = build_topology(&TopologySpec::complete(6, 3)).unwrap();
        let h = g.honest_subgraph().unwrap();
        assert_eq!(h.num_clients(), 3);
        assert!(h.byzantine().is_empty());
        assert_eq!(h.edge_count(), 6);
        assert_eq!(g.honest_edges().len(), 3);
    }
}
