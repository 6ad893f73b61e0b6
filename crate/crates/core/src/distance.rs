use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ged;
use crate::graph::ArchGraph;
use crate::space::Space;
use crate::sssp::{sssp_bucketed, UNREACHABLE};

/// How a distance matrix was computed.
#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Backend {
    ExactApsp = 0,
    ExactAstar = 1,
    ApproxBipartite = 2,
}

impl Backend {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Backend::ExactApsp),
            1 => Some(Backend::ExactAstar),
            2 => Some(Backend::ApproxBipartite),
            _ => None,
        }
    }

    pub fn is_exact(self) -> bool {
        !matches!(self, Backend::ApproxBipartite)
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::ExactApsp => "exact_apsp",
            Backend::ExactAstar => "exact_astar",
            Backend::ApproxBipartite => "approx_bipartite",
        }
    }
}

/// Symmetric pairwise distances among sampled architectures, indexed in
/// sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<u64>,
    values: Vec<f64>,
    backend: Backend,
}

impl DistanceMatrix {
    /// Checks shape, zero diagonal, symmetry and nonnegativity.
    pub fn new(ids: Vec<u64>, values: Vec<f64>, backend: Backend) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "{} values for {n} architectures",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let d = values[i * n + j];
                if d != values[j * n + i] || d.is_nan() || d < 0.0 {
                    return Err(Error::InvalidArgument(format!("bad entry at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { ids, values, backend })
    }

    pub fn from_fn(ids: Vec<u64>, backend: Backend, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { ids, values, backend }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_of(&self, arch_id: u64) -> Option<usize> {
        self.ids.iter().position(|&id| id == arch_id)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Pairwise distances among the sampled vertices of `graph`, one bucketed
/// SSSP per sampled source. Sources run in parallel; each writes only its
/// own row, so the result does not depend on scheduling.
pub fn apsp_sampled(graph: &ArchGraph) -> Result<DistanceMatrix> {
    let n = graph.sampled_count();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    let sampled = graph.sampled_vertices();
    let unit = graph.unit();
    let rows: Vec<Result<Vec<f64>>> = sampled
        .par_iter()
        .map(|&src| {
            let dist = sssp_bucketed(graph, src as usize);
            sampled
                .iter()
                .map(|&dst| match dist[dst as usize] {
                    UNREACHABLE => Err(Error::Disconnected(
                        graph.arch_id(src as usize),
                        graph.arch_id(dst as usize),
                    )),
                    d => Ok(d as f64 * unit),
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for row in rows {
        values.extend(row?);
    }
    Ok(DistanceMatrix { ids: graph.sampled_ids(), values, backend: Backend::ExactApsp })
}

/// Pairwise distances by a per-pair backend (A* or bipartite).
pub fn pairwise(space: &Space, ids: &[u64], backend: Backend) -> Result<DistanceMatrix> {
    let archs = ids.iter().map(|&id| space.decode(id)).collect::<Result<Vec<_>>>()?;
    let n = archs.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| match backend {
            Backend::ExactAstar => ged::exact_ged_astar(space, &archs[i], &archs[j]),
            Backend::ApproxBipartite => Ok(ged::approx_ged_bipartite(space, &archs[i], &archs[j])),
            Backend::ExactApsp => Err(Error::InvalidArgument(
                "exact_apsp runs over the edit graph, use apsp_sampled".into(),
            )),
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        let d = d?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    Ok(DistanceMatrix { ids: ids.to_vec(), values, backend })
}
