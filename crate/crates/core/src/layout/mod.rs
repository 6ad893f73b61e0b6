//! Overview layout: cluster discs placed by stress minimization, each disc
//! a hexagonal grid of architectures arranged so that similar ones touch.

pub mod hex;
pub mod labels;
pub mod qap;
pub mod stress;
pub mod view;

use serde::{Deserialize, Serialize};

pub use hex::{Hex, HexGrid};
pub use qap::{
    greedy_assign, greedy_assign_from, is_swap_optimal, layout_cluster, layout_objective, swap_refine,
    ClusterPlacement, Placement, DEFAULT_MAX_PASSES, DEFAULT_STARTS,
};
pub use stress::{separate_discs, stress_layout_clusters};
pub use view::{cyclic_order_preserved, layout_levels, layout_view, ViewParams};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CellOut {
    pub arch_id: u64,
    /// Axial coordinates relative to the cluster's grid origin.
    pub q: i32,
    pub r: i32,
    /// Absolute position in layout units.
    pub x: f64,
    pub y: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct GlyphOut {
    pub arch_id: u64,
    /// The representative's cell followed by its reserved ring, as (q, r).
    pub cells: Vec<[i32; 2]>,
    /// Center of the structure-glyph box.
    pub label_anchor: [f64; 2],
    /// Leader line from the representative's cell to the label.
    pub leader: [[f64; 2]; 2],
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ClusterLayout {
    pub id: usize,
    pub center: [f64; 2],
    pub radius: f64,
    /// Every displayed member, representatives included.
    pub cells: Vec<CellOut>,
    pub glyphs: Vec<GlyphOut>,
    pub objective: f64,
    pub greedy_objective: f64,
}

impl ClusterLayout {
    pub fn is_glyph(&self, arch_id: u64) -> bool {
        self.glyphs.iter().any(|g| g.arch_id == arch_id)
    }
}

/// One navigation view: the clusters of `level` under `cluster`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct LayoutResult {
    pub version: u32,
    /// Hex digest of the space the layout was computed over.
    pub space_hash: String,
    pub level: usize,
    pub cluster: usize,
    /// Layout units per cell spacing.
    pub scale: f64,
    /// [min_x, min_y, max_x, max_y] over discs and labels.
    pub bounds: [f64; 4],
    pub clusters: Vec<ClusterLayout>,
}

impl LayoutResult {
    pub fn arch_ids(&self) -> Vec<u64> {
        self.clusters.iter().flat_map(|c| c.cells.iter().map(|x| x.arch_id)).collect()
    }

    pub fn cell(&self, arch_id: u64) -> Option<(&ClusterLayout, &CellOut)> {
        self.clusters
            .iter()
            .find_map(|c| c.cells.iter().find(|x| x.arch_id == arch_id).map(|x| (c, x)))
    }
}
