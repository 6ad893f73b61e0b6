//! The edit graph: one vertex per architecture of the space, an undirected
//! edge between every pair one edit apart.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::{Space, DEFAULT_SPACE_CAP};

/// Edit graph over a whole space in compressed sparse rows. Edge weights are
/// quantized edit costs (see [`Space::cost_unit`]).
///
/// Vertices outside the sample are dummies: they are never reported in a
/// distance matrix but carry the shortest edit paths between samples.
#[derive(Clone, Debug)]
pub struct ArchGraph {
    ids: Vec<u64>,
    is_sampled: Vec<bool>,
    sampled: Vec<u32>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<u64>,
    unit: f64,
}

impl ArchGraph {
    /// Builds the graph over every architecture of `space`, flagging
    /// `sampled` (kept in the given order) and treating the rest as dummies.
    pub fn build(space: &Space, sampled: &[u64]) -> Result<Self> {
        Self::build_with_cap(space, sampled, DEFAULT_SPACE_CAP)
    }

    pub fn build_with_cap(space: &Space, sampled: &[u64], cap: u64) -> Result<Self> {
        let archs: Vec<_> = space.enumerate_with_cap(None, cap)?.collect();
        let ids: Vec<u64> = archs.iter().map(|a| space.arch_id(a)).collect();

        let rows: Vec<Vec<(u32, u64)>> = archs
            .par_iter()
            .map(|a| {
                space
                    .neighbor_units(a)
                    .into_iter()
                    .map(|(id, w)| {
                        let v = ids.binary_search(&id).expect("neighbor lies in the space");
                        (v as u32, w)
                    })
                    .collect()
            })
            .collect();

        let mut offsets = Vec::with_capacity(ids.len() + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for row in rows {
            for (v, w) in row {
                targets.push(v);
                weights.push(w);
            }
            offsets.push(targets.len());
        }

        let mut graph = ArchGraph {
            is_sampled: vec![false; ids.len()],
            ids,
            sampled: Vec::new(),
            offsets,
            targets,
            weights,
            unit: space.cost_unit(),
        };
        graph.set_sample(sampled)?;
        Ok(graph)
    }

    fn set_sample(&mut self, sampled: &[u64]) -> Result<()> {
        let mut seen = HashSet::with_capacity(sampled.len());
        let mut order = Vec::with_capacity(sampled.len());
        for &id in sampled {
            let v = self.index_of(id).ok_or(Error::NotInSpace(id))?;
            if !seen.insert(id) {
                return Err(Error::DuplicateSample(id));
            }
            order.push(v as u32);
        }
        self.is_sampled.iter_mut().for_each(|f| *f = false);
        for &v in &order {
            self.is_sampled[v as usize] = true;
        }
        self.sampled = order;
        Ok(())
    }

    /// N
    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    /// n
    pub fn sampled_count(&self) -> usize {
        self.sampled.len()
    }

    pub fn dummy_count(&self) -> usize {
        self.ids.len() - self.sampled.len()
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn sampled_vertices(&self) -> &[u32] {
        &self.sampled
    }

    pub fn sampled_ids(&self) -> Vec<u64> {
        self.sampled.iter().map(|&v| self.ids[v as usize]).collect()
    }

    pub fn is_sampled(&self, v: usize) -> bool {
        self.is_sampled[v]
    }

    pub fn arch_id(&self, v: usize) -> u64 {
        self.ids[v]
    }

    pub fn index_of(&self, arch_id: u64) -> Option<usize> {
        self.ids.binary_search(&arch_id).ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// (neighbor, quantized cost) pairs of `v`.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&t, &w)| (t as usize, w))
    }

    /// Size of one quantized cost unit.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// Copy of the graph with every edge touching dummy vertex `v` removed.
    pub fn with_vertex_removed(&self, v: usize) -> Result<Self> {
        if v >= self.vertex_count() {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
        }
        if self.is_sampled[v] {
            return Err(Error::InvalidArgument(format!("vertex {v} is sampled")));
        }
        let mut offsets = Vec::with_capacity(self.offsets.len());
        let mut targets = Vec::with_capacity(self.targets.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        offsets.push(0);
        for u in 0..self.vertex_count() {
            if u != v {
                for (t, w) in self.neighbors(u) {
                    if t != v {
                        targets.push(t as u32);
                        weights.push(w);
                    }
                }
            }
            offsets.push(targets.len());
        }
        Ok(ArchGraph { offsets, targets, weights, ..self.clone() })
    }
}
