//! Baselines the benchmarks compare the library against.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use archmap::sssp::UNREACHABLE;
use archmap::{ArchGraph, OpKind, OpType, Space, SpaceSpec};

/// Dijkstra over a binary heap, the textbook alternative to the bucket queue.
pub fn sssp_heap(graph: &ArchGraph, source: usize) -> Vec<u64> {
    let mut dist = vec![UNREACHABLE; graph.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (v, w) in graph.neighbors(u) {
            if d + w < dist[v] {
                dist[v] = d + w;
                heap.push(Reverse((d + w, v)));
            }
        }
    }
    dist
}

/// A chain of `len` slots over {none, conv1x1, conv3x3}.
pub fn chain_space(len: usize) -> Space {
    Space::new(SpaceSpec::op_slot(
        len,
        vec![
            OpType::new("none", OpKind::None),
            OpType::new("conv1x1", OpKind::Conv),
            OpType::new("conv3x3", OpKind::Conv),
        ],
    ))
    .expect("chain spaces are valid")
}
