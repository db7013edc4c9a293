use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::geometry::VisibilityTable;

/// Undirected camera adjacency; edges stored once as `(lo, hi)`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraGraph {
    pub cameras: usize,
    pub edges: Vec<(u32, u32)>,
}

impl CameraGraph {
    /// Normalizes, deduplicates and sorts `edges`; self-loops are dropped.
    pub fn new(cameras: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let set: BTreeSet<(u32, u32)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        Self {
            cameras,
            edges: set.into_iter().collect(),
        }
    }

    /// Every pair of cameras in the scene.
    pub fn complete(cameras: usize) -> Self {
        let n = cameras as u32;
        Self::new(cameras, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    fn neighbours(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.cameras];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        adj
    }

    /// Graph joining cameras at most `ring` hops apart.
    pub fn ring(&self, ring: usize) -> Self {
        if ring <= 1 {
            return self.clone();
        }
        let adj = self.neighbours();
        let mut edges = Vec::new();
        for start in 0..self.cameras {
            let mut dist = vec![usize::MAX; self.cameras];
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                if dist[u] == ring {
                    continue;
                }
                for &v in &adj[u] {
                    if dist[v as usize] == usize::MAX {
                        dist[v as usize] = dist[u] + 1;
                        queue.push_back(v as usize);
                    }
                }
            }
            edges.extend(
                (start + 1..self.cameras)
                    .filter(|&v| dist[v] != usize::MAX)
                    .map(|v| (start as u32, v as u32)),
            );
        }
        Self::new(self.cameras, edges)
    }
}

/// Distinct cameras optimized jointly, ascending by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CameraTuple {
    pub cameras: Vec<u32>,
}

impl CameraTuple {
    pub fn new(mut cameras: Vec<u32>) -> Self {
        cameras.sort_unstable();
        cameras.dedup();
        Self { cameras }
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Samples visible to every camera of the tuple.
    pub fn shared_samples(&self, visibility: &VisibilityTable) -> usize {
        (0..visibility.samples())
            .filter(|&p| self.cameras.iter().all(|&c| visibility.get(c as usize, p)))
            .count()
    }
}

/// Batches of camera-disjoint tuples. `k = 1` yields one batch of
/// singletons; `k = 2` greedily colours the edges of the `ring`-hop graph;
/// `k = 3` takes every path of two edges and packs them greedily.
pub fn independent_tuple_schedule(graph: &CameraGraph, k: usize, ring: usize) -> Result<Vec<Vec<CameraTuple>>, SolverError> {
    let graph = graph.ring(ring);
    let tuples: Vec<CameraTuple> = match k {
        1 => {
            let all = (0..graph.cameras as u32).map(|c| CameraTuple::new(vec![c])).collect();
            return Ok(vec![all]);
        }
        2 => graph.edges.iter().map(|&(a, b)| CameraTuple::new(vec![a, b])).collect(),
        3 => {
            let adj = graph.neighbours();
            let mut set = BTreeSet::new();
            for (centre, nbrs) in adj.iter().enumerate() {
                for (i, &a) in nbrs.iter().enumerate() {
                    for &b in &nbrs[i + 1..] {
                        set.insert(CameraTuple::new(vec![a, centre as u32, b]));
                    }
                }
            }
            set.into_iter().collect()
        }
        _ => return Err(SolverError::UnsupportedTupleSize(k)),
    };

    let mut batches: Vec<Vec<CameraTuple>> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::new();
    for tuple in tuples {
        let slot = used
            .iter()
            .position(|u| tuple.cameras.iter().all(|&c| !u[c as usize]))
            .unwrap_or_else(|| {
                batches.push(Vec::new());
                used.push(vec![false; graph.cameras]);
                batches.len() - 1
            });
        for &c in &tuple.cameras {
            used[slot][c as usize] = true;
        }
        batches[slot].push(tuple);
    }
    Ok(batches)
}
