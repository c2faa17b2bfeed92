//! Seeded construction of the undirected interaction graph agents live on.
//!
//! Networks are stored in canonical form (edges as (i, j) with i < j, sorted;
//! neighbour lists sorted ascending) so identical arguments always produce
//! identical structures, which the bit-reproducibility guarantees rely on.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported generator families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NetworkKind {
    Complete,
    ErdosRenyi { p: f64 },
    WattsStrogatz { k: usize, beta: f64 },
    BarabasiAlbert { m: usize },
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkKind::Complete => write!(f, "complete"),
            NetworkKind::ErdosRenyi { p } => write!(f, "erdos_renyi(p={p})"),
            NetworkKind::WattsStrogatz { k, beta } => {
                write!(f, "watts_strogatz(k={k}, beta={beta})")
            }
            NetworkKind::BarabasiAlbert { m } => write!(f, "barabasi_albert(m={m})"),
        }
    }
}

/// Simple undirected graph over agents 0..n.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

fn canon(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SocialNetwork {
    /// Build from an explicit edge list; pairs may be given in either order.
    /// Self-loops, out-of-range endpoints, and duplicates are errors.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Network("node count must be >= 1".into()));
        }
        let mut canonical: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Network(format!("self-loop at node {a}")));
            }
            if (a as usize) >= n || (b as usize) >= n {
                return Err(Error::Network(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            canonical.push(canon(a, b));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Network(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &canonical {
            adjacency[i as usize].push(j);
            adjacency[j as usize].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(SocialNetwork {
            n,
            edges: canonical,
            adjacency,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Network("node count must be >= 1".into()));
        }
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                edges.push((i, j));
            }
        }
        SocialNetwork::from_edges(n, &edges)
    }

    /// G(n, p): every pair independently linked with probability `p`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Network(format!("edge probability {p} not in [0, 1]")));
        }
        if n == 0 {
            return Err(Error::Network("node count must be >= 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        SocialNetwork::from_edges(n, &edges)
    }

    /// Small-world graph: ring lattice of even degree `k`, each lattice edge
    /// rewired with probability `beta`. Rewiring keeps the edge count at
    /// n*k/2; a rewire is skipped when the source node already neighbours
    /// every other node.
    pub fn watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Network("node count must be >= 1".into()));
        }
        if !k.is_multiple_of(2) || k >= n {
            return Err(Error::Network(format!(
                "lattice degree k={k} must be even and < n={n}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
            return Err(Error::Network(format!(
                "rewiring probability {beta} not in [0, 1]"
            )));
        }
        let mut present: HashSet<(u32, u32)> = HashSet::new();
        let mut degree = vec![0usize; n];
        for i in 0..n as u32 {
            for d in 1..=(k / 2) as u32 {
                let j = (i + d) % n as u32;
                present.insert(canon(i, j));
                degree[i as usize] += 1;
                degree[j as usize] += 1;
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for d in 1..=(k / 2) as u32 {
            for i in 0..n as u32 {
                let v = (i + d) % n as u32;
                if rng.random::<f64>() >= beta {
                    continue;
                }
                if degree[i as usize] >= n - 1 {
                    continue; // no node left to rewire toward
                }
                let mut w = rng.random_range(0..n as u32);
                while w == i || present.contains(&canon(i, w)) {
                    w = rng.random_range(0..n as u32);
                }
                present.remove(&canon(i, v));
                degree[i as usize] -= 1;
                degree[v as usize] -= 1;
                present.insert(canon(i, w));
                degree[i as usize] += 1;
                degree[w as usize] += 1;
            }
        }
        let edges: Vec<(u32, u32)> = present.into_iter().collect();
        SocialNetwork::from_edges(n, &edges)
    }

    /// Preferential attachment: start from a clique on the first `m` nodes,
    /// then each new node links to `m` distinct existing nodes chosen with
    /// probability proportional to degree (uniformly while all degrees are
    /// zero, which only happens for m = 1).
    pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Network("node count must be >= 1".into()));
        }
        if m == 0 || m >= n {
            return Err(Error::Network(format!(
                "attachment count m={m} must satisfy 1 <= m < n={n}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(m * (n - m) + m * (m - 1) / 2);
        // Endpoint multiset: each node appears once per incident edge, so a
        // uniform index draw is degree-proportional selection.
        let mut endpoints: Vec<u32> = Vec::new();
        for i in 0..m as u32 {
            for j in (i + 1)..m as u32 {
                edges.push((i, j));
                endpoints.push(i);
                endpoints.push(j);
            }
        }
        for v in m as u32..n as u32 {
            let mut targets: Vec<u32> = Vec::with_capacity(m);
            while targets.len() < m {
                let t = if endpoints.is_empty() {
                    rng.random_range(0..v)
                } else {
                    endpoints[rng.random_range(0..endpoints.len())]
                };
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            for &t in &targets {
                edges.push(canon(v, t));
                endpoints.push(v);
                endpoints.push(t);
            }
        }
        SocialNetwork::from_edges(n, &edges)
    }

    pub fn generate(kind: NetworkKind, n: usize, seed: u64) -> Result<Self> {
        match kind {
            NetworkKind::Complete => SocialNetwork::complete(n),
            NetworkKind::ErdosRenyi { p } => SocialNetwork::erdos_renyi(n, p, seed),
            NetworkKind::WattsStrogatz { k, beta } => {
                SocialNetwork::watts_strogatz(n, k, beta, seed)
            }
            NetworkKind::BarabasiAlbert { m } => SocialNetwork::barabasi_albert(n, m, seed),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Write the edge list as two-column CSV (`i,j` header, i < j, sorted).
    pub fn save_edge_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("i,j\n");
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i},{j}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Load an edge-list CSV written by `save_edge_csv`. The node count is
    /// the largest endpoint + 1 unless a larger `n` is given.
    pub fn load_edge_csv(path: &Path, n: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut edges = Vec::new();
        let mut max_node = 0u32;
        for (idx, line) in text.lines().enumerate() {
            let row = idx + 1;
            if row == 1 || line.trim().is_empty() {
                continue; // header
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<u32> {
                s.map(str::trim)
                    .ok_or_else(|| Error::DataRow {
                        path: path.display().to_string(),
                        row,
                        reason: "expected two columns i,j".into(),
                    })?
                    .parse::<u32>()
                    .map_err(|e| Error::DataRow {
                        path: path.display().to_string(),
                        row,
                        reason: format!("bad node index: {e}"),
                    })
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            max_node = max_node.max(i).max(j);
            edges.push((i, j));
        }
        let inferred = max_node as usize + 1;
        let n = n.unwrap_or(inferred).max(inferred);
        SocialNetwork::from_edges(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_has_all_pairs() {
        let g = SocialNetwork::complete(4).unwrap();
        assert_eq!(g.edge_count(), 6);
        for i in 0..4 {
            assert_eq!(g.degree(i), 3);
        }
    }

    #[test]
    fn erdos_renyi_p_zero_is_edgeless() {
        let g = SocialNetwork::erdos_renyi(100, 0.0, 5).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn erdos_renyi_p_one_is_complete() {
        let g = SocialNetwork::erdos_renyi(20, 1.0, 5).unwrap();
        assert_eq!(g.edge_count(), 20 * 19 / 2);
    }

    #[test]
    fn watts_strogatz_beta_zero_is_ring_lattice() {
        let g = SocialNetwork::watts_strogatz(10, 4, 0.0, 1).unwrap();
        assert_eq!(g.edge_count(), 20);
        for i in 0..10 {
            assert_eq!(g.degree(i), 4);
        }
        // Ring structure: node 0 neighbours are 1, 2, 8, 9.
        assert_eq!(g.neighbours(0), &[1, 2, 8, 9]);
    }

    #[test]
    fn watts_strogatz_rewiring_preserves_edge_count() {
        for seed in 0..5 {
            let g = SocialNetwork::watts_strogatz(50, 6, 0.3, seed).unwrap();
            assert_eq!(g.edge_count(), 150);
        }
    }

    #[test]
    fn watts_strogatz_rejects_odd_or_large_k() {
        assert!(SocialNetwork::watts_strogatz(10, 3, 0.1, 1).is_err());
        assert!(SocialNetwork::watts_strogatz(10, 10, 0.1, 1).is_err());
    }

    #[test]
    fn barabasi_albert_edge_count() {
        let (n, m) = (50, 3);
        let g = SocialNetwork::barabasi_albert(n, m, 9).unwrap();
        assert_eq!(g.edge_count(), m * (n - m) + m * (m - 1) / 2);
        for i in 0..n {
            assert!(g.degree(i) >= 1);
        }
    }

    #[test]
    fn barabasi_albert_m_one_is_tree() {
        let g = SocialNetwork::barabasi_albert(30, 1, 2).unwrap();
        assert_eq!(g.edge_count(), 29);
    }

    #[test]
    fn generators_are_reproducible() {
        for kind in [
            NetworkKind::ErdosRenyi { p: 0.1 },
            NetworkKind::WattsStrogatz { k: 4, beta: 0.5 },
            NetworkKind::BarabasiAlbert { m: 2 },
        ] {
            let a = SocialNetwork::generate(kind, 40, 77).unwrap();
            let b = SocialNetwork::generate(kind, 40, 77).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(SocialNetwork::from_edges(3, &[(0, 0)]).is_err());
        assert!(SocialNetwork::from_edges(3, &[(0, 5)]).is_err());
        assert!(SocialNetwork::from_edges(3, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn adjacency_is_sorted_and_consistent() {
        let g = SocialNetwork::erdos_renyi(30, 0.2, 3).unwrap();
        let mut count = 0;
        for i in 0..30 {
            let ns = g.neighbours(i);
            assert!(ns.windows(2).all(|w| w[0] < w[1]));
            count += ns.len();
            for &j in ns {
                assert!(g.neighbours(j as usize).contains(&(i as u32)));
            }
        }
        assert_eq!(count, 2 * g.edge_count());
    }

    #[test]
    fn edge_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv");
        let g = SocialNetwork::watts_strogatz(25, 4, 0.2, 8).unwrap();
        g.save_edge_csv(&path).unwrap();
        let back = SocialNetwork::load_edge_csv(&path, None).unwrap();
        assert_eq!(g, back);
    }
}
