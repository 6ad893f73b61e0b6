//! Single-source shortest paths over the edit graph with equal-cost buckets.
//!
//! Edit costs come from a finite set, so the tentative distances in the
//! frontier take few distinct values at any time. The frontier is a sorted
//! list of buckets, one per distinct accumulated cost; extracting a minimum
//! vertex pops from the front bucket in O(1), and inserting scans only the
//! handful of live buckets.

use std::collections::VecDeque;

use crate::graph::ArchGraph;

pub const UNREACHABLE: u64 = u64::MAX;

/// Frontier of vertices grouped by exact (quantized) tentative cost.
#[derive(Debug, Default)]
pub struct BucketQueue {
    buckets: VecDeque<(u64, Vec<u32>)>,
    len: usize,
}

impl BucketQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Live buckets, i.e. distinct keys in the frontier.
    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn push(&mut self, key: u64, v: u32) {
        self.len += 1;
        // New keys are almost always at or near the back.
        let mut i = self.buckets.len();
        while i > 0 && self.buckets[i - 1].0 > key {
            i -= 1;
        }
        if i > 0 && self.buckets[i - 1].0 == key {
            self.buckets[i - 1].1.push(v);
        } else {
            self.buckets.insert(i, (key, vec![v]));
        }
    }

    pub fn pop_min(&mut self) -> Option<(u64, u32)> {
        let (key, bucket) = self.buckets.front_mut()?;
        let key = *key;
        let v = bucket.pop().expect("buckets are never left empty");
        if bucket.is_empty() {
            self.buckets.pop_front();
        }
        self.len -= 1;
        Some((key, v))
    }
}

/// Exact quantized distances from `source` to every vertex; unreachable
/// vertices get [`UNREACHABLE`].
pub fn sssp_bucketed(graph: &ArchGraph, source: usize) -> Vec<u64> {
    let n = graph.vertex_count();
    let mut dist = vec![UNREACHABLE; n];
    let mut done = vec![false; n];
    let mut queue = BucketQueue::new();
    dist[source] = 0;
    queue.push(0, source as u32);
    while let Some((d, u)) = queue.pop_min() {
        let u = u as usize;
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        for (v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                queue.push(nd, v as u32);
            }
        }
    }
    dist
}

/// [`sssp_bucketed`] converted to costs; unreachable vertices are infinite.
pub fn sssp_costs(graph: &ArchGraph, source: usize) -> Vec<f64> {
    let unit = graph.unit();
    sssp_bucketed(graph, source)
        .into_iter()
        .map(|d| if d == UNREACHABLE { f64::INFINITY } else { d as f64 * unit })
        .collect()
}
