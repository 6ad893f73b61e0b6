//! Assembling a navigation view, and keeping it stable across zoom levels.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::cluster::{sample_clusters, ClusterTree, MIN_PER_CLUSTER};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::layout::hex::{Hex, HexGrid};
use crate::layout::labels::{place_labels, Disc, LABEL_SIZE};
use crate::layout::qap::{layout_cluster, layout_objective, swap_refine_frozen, Placement, DEFAULT_MAX_PASSES, DEFAULT_STARTS};
use crate::layout::stress::{separate_discs, stress_layout_clusters, DEFAULT_STRESS_ITERATIONS};
use crate::layout::{CellOut, ClusterLayout, GlyphOut, LayoutResult, LAYOUT_VERSION};

#[derive(Clone, Copy, Debug)]
pub struct ViewParams {
    /// Architectures displayed per view, split across clusters.
    pub budget: usize,
    pub max_passes: usize,
    /// Greedy restarts per cluster.
    pub starts: usize,
    pub stress_iterations: usize,
    pub seed: u64,
    /// Minimum empty space between cluster discs.
    pub gap: f64,
}

impl Default for ViewParams {
    fn default() -> Self {
        ViewParams {
            budget: 300,
            max_passes: DEFAULT_MAX_PASSES,
            starts: DEFAULT_STARTS,
            stress_iterations: DEFAULT_STRESS_ITERATIONS,
            seed: 0,
            gap: 2.0,
        }
    }
}

/// Lays out the clusters shown at `level` below `cluster`.
///
/// With a `prior` view (normally the same cluster one level up), members
/// shown in both keep the cyclic order of their angles around their disc
/// center: they are rotated as a block over the cells they were given, and
/// are then frozen while the other members are refined.
#[allow(clippy::too_many_arguments)]
pub fn layout_view(
    dm: &DistanceMatrix,
    tree: &ClusterTree,
    accuracy: Option<&[f64]>,
    space_hash: u64,
    level: usize,
    cluster: usize,
    prior: Option<&LayoutResult>,
    params: &ViewParams,
) -> Result<LayoutResult> {
    let anchor = tree
        .node(cluster)
        .ok_or_else(|| Error::InvalidArgument(format!("no cluster {cluster}")))?;
    if anchor.level > level || level > tree.depth() {
        return Err(Error::InvalidArgument(format!(
            "level {level} is not below cluster {cluster} (tree depth {})",
            tree.depth()
        )));
    }
    let shown: Vec<usize> = tree
        .clusters_at_level(level)
        .into_iter()
        .filter(|&c| is_descendant(tree, c, cluster))
        .collect();

    let rep_order = |c: usize| -> Vec<usize> {
        let node = &tree.nodes[c];
        let mut reps =
            if node.representatives.is_empty() { vec![node.medoid] } else { node.representatives.clone() };
        if let Some(acc) = accuracy {
            reps.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]).then(a.cmp(&b)));
        }
        reps
    };
    let reps: Vec<Vec<usize>> = shown.iter().map(|&c| rep_order(c)).collect();
    let rep_set: HashSet<usize> = reps.iter().flatten().copied().collect();

    let index: HashMap<u64, usize> = dm.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let prior_keys: HashMap<usize, (f64, i64)> = prior
        .map(|p| {
            p.clusters
                .iter()
                .flat_map(|c| c.cells.iter())
                .filter_map(|x| index.get(&x.arch_id).map(|&i| (i, hex_key(x.q, x.r))))
                .collect()
        })
        .unwrap_or_default();
    let prior_set: HashSet<usize> = prior_keys.keys().copied().collect();

    let budget = params.budget.max(MIN_PER_CLUSTER * shown.len());
    let sample = sample_clusters(tree, dm, &shown, budget, &[rep_set, prior_set])?;

    let laid: Vec<Result<(HexGrid, Placement, f64, f64)>> = shown
        .par_iter()
        .zip(&reps)
        .map(|(&c, reps)| {
            let members = sample.for_cluster(c);
            let c = layout_cluster(members, dm, reps, params.max_passes, params.starts)?;
            let mut placement = c.placement;
            if !prior_keys.is_empty() {
                placement = stabilize(placement, dm, &c.grid, &prior_keys, params.max_passes);
            }
            let objective = layout_objective(&placement, dm, &c.grid);
            Ok((c.grid, placement, c.greedy_objective, objective))
        })
        .collect();
    let laid = laid.into_iter().collect::<Result<Vec<_>>>()?;

    let medoids: Vec<usize> = shown.iter().map(|&c| tree.nodes[c].medoid).collect();
    let cdist: Vec<Vec<f64>> =
        medoids.iter().map(|&a| medoids.iter().map(|&b| dm.get(a, b)).collect()).collect();
    let stress = stress_layout_clusters(&cdist, params.stress_iterations, params.seed);
    let radii: Vec<f64> = laid.iter().map(|l| l.0.radius()).collect();
    let centers = separate_discs(&stress.positions, &radii, params.gap);

    let mut clusters = Vec::with_capacity(shown.len());
    let mut targets = Vec::new();
    for (k, (&c, (grid, p, greedy, objective))) in shown.iter().zip(&laid).enumerate() {
        let center = centers[k];
        let cells = (0..p.members.len())
            .map(|m| {
                let h = grid.cell(p.cell_of[m]);
                let [x, y] = h.center();
                CellOut { arch_id: dm.ids()[p.members[m]], q: h.q, r: h.r, x: center[0] + x, y: center[1] + y }
            })
            .collect();
        let mut glyphs = Vec::new();
        for &rep in &reps[k] {
            let m = p.members.iter().position(|&x| x == rep).expect("representative is placed");
            let h = grid.cell(p.cell_of[m]);
            let [x, y] = h.center();
            let at = [center[0] + x, center[1] + y];
            targets.push((k, at));
            glyphs.push(GlyphOut {
                arch_id: dm.ids()[rep],
                cells: p.glyph_cells(grid, m).iter().map(|&i| [grid.cell(i).q, grid.cell(i).r]).collect(),
                label_anchor: [0.0, 0.0],
                leader: [at, at],
            });
        }
        clusters.push(ClusterLayout {
            id: c,
            center,
            radius: radii[k],
            cells,
            glyphs,
            objective: *objective,
            greedy_objective: *greedy,
        });
    }

    let discs: Vec<Disc> =
        centers.iter().zip(&radii).map(|(&center, &radius)| Disc { center, radius }).collect();
    let anchors = place_labels(&discs, &targets, LABEL_SIZE);
    let mut next = anchors.iter();
    for cl in &mut clusters {
        for g in &mut cl.glyphs {
            let a = *next.next().expect("one anchor per glyph");
            g.label_anchor = a;
            g.leader[1] = a;
        }
    }

    let mut bounds = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut grow = |x: f64, y: f64, hw: f64, hh: f64| {
        bounds[0] = bounds[0].min(x - hw);
        bounds[1] = bounds[1].min(y - hh);
        bounds[2] = bounds[2].max(x + hw);
        bounds[3] = bounds[3].max(y + hh);
    };
    for d in &discs {
        grow(d.center[0], d.center[1], d.radius, d.radius);
    }
    for a in &anchors {
        grow(a[0], a[1], LABEL_SIZE[0] / 2.0, LABEL_SIZE[1] / 2.0);
    }

    Ok(LayoutResult {
        version: LAYOUT_VERSION,
        space_hash: format!("{space_hash:016x}"),
        level,
        cluster,
        scale: 1.0,
        bounds,
        clusters,
    })
}

/// Views for every level under the root, each stabilized against the one
/// above it.
pub fn layout_levels(
    dm: &DistanceMatrix,
    tree: &ClusterTree,
    accuracy: Option<&[f64]>,
    space_hash: u64,
    params: &ViewParams,
) -> Result<Vec<LayoutResult>> {
    let mut out: Vec<LayoutResult> = Vec::new();
    for level in 0..=tree.depth() {
        let view = layout_view(dm, tree, accuracy, space_hash, level, 0, out.last(), params)?;
        out.push(view);
    }
    Ok(out)
}

fn is_descendant(tree: &ClusterTree, mut node: usize, ancestor: usize) -> bool {
    loop {
        if node == ancestor {
            return true;
        }
        match tree.nodes[node].parent {
            Some(p) => node = p,
            None => return false,
        }
    }
}

/// Sort key for the angular position of a cell around its grid origin.
fn hex_key(q: i32, r: i32) -> (f64, i64) {
    let h = Hex::new(q, r);
    (h.angle(), h.norm2())
}

fn cmp_key(a: &(f64, i64), b: &(f64, i64)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Members of this disc that were shown before and are not glyph centers
/// now, ordered by their prior angular key (arch index breaks ties).
fn retained(p: &Placement, prior: &HashMap<usize, (f64, i64)>) -> Vec<usize> {
    let mut out: Vec<usize> =
        (0..p.members.len()).filter(|&m| !p.is_rep[m] && prior.contains_key(&p.members[m])).collect();
    out.sort_by(|&a, &b| {
        cmp_key(&prior[&p.members[a]], &prior[&p.members[b]]).then(p.members[a].cmp(&p.members[b]))
    });
    out
}

fn stabilize(
    mut p: Placement,
    dm: &DistanceMatrix,
    grid: &HexGrid,
    prior: &HashMap<usize, (f64, i64)>,
    max_passes: usize,
) -> Placement {
    let kept = retained(&p, prior);
    if kept.is_empty() {
        return p;
    }
    let mut cells: Vec<usize> = kept.iter().map(|&m| p.cell_of[m]).collect();
    cells.sort_by(|&a, &b| {
        let (ha, hb) = (grid.cell(a), grid.cell(b));
        cmp_key(&hex_key(ha.q, ha.r), &hex_key(hb.q, hb.r))
    });
    let mut best: Option<(f64, Placement)> = None;
    for offset in 0..cells.len() {
        let mut trial = p.clone();
        for (i, &m) in kept.iter().enumerate() {
            let c = cells[(i + offset) % cells.len()];
            trial.cell_of[m] = c;
            trial.occupant[c] = Some(m);
        }
        let obj = layout_objective(&trial, dm, grid);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, trial));
        }
    }
    p = best.expect("at least one rotation").1;
    let mut frozen = p.is_rep.clone();
    for &m in &kept {
        frozen[m] = true;
    }
    swap_refine_frozen(p, dm, grid, max_passes, &frozen).placement
}

/// Whether, in every disc of `next`, the non-glyph members also shown in
/// `prior` appear in the same cyclic angular order as they did there.
pub fn cyclic_order_preserved(prior: &LayoutResult, next: &LayoutResult) -> bool {
    let before: HashMap<u64, (f64, i64)> = prior
        .clusters
        .iter()
        .flat_map(|c| c.cells.iter())
        .map(|x| (x.arch_id, hex_key(x.q, x.r)))
        .collect();
    next.clusters.iter().all(|cl| {
        let mut kept: Vec<&CellOut> = cl
            .cells
            .iter()
            .filter(|x| !cl.is_glyph(x.arch_id) && before.contains_key(&x.arch_id))
            .collect();
        if kept.len() < 3 {
            return true;
        }
        let mut old = kept.clone();
        old.sort_by(|a, b| cmp_key(&before[&a.arch_id], &before[&b.arch_id]).then(a.arch_id.cmp(&b.arch_id)));
        kept.sort_by(|a, b| cmp_key(&hex_key(a.q, a.r), &hex_key(b.q, b.r)));
        let old: Vec<u64> = old.iter().map(|x| x.arch_id).collect();
        let new: Vec<u64> = kept.iter().map(|x| x.arch_id).collect();
        is_rotation(&old, &new)
    })
}

fn is_rotation(a: &[u64], b: &[u64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    match b.iter().position(|&x| x == a[0]) {
        Some(s) => (0..a.len()).all(|i| a[i] == b[(s + i) % b.len()]),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_hierarchy, tests::blobs, HierarchyParams};

    #[test]
    fn rotation_check() {
        assert!(is_rotation(&[1, 2, 3], &[3, 1, 2]));
        assert!(!is_rotation(&[1, 2, 3], &[1, 3, 2]));
    }

    #[test]
    fn levels_are_stable_and_feasible() {
        let dm = blobs(30);
        let params = HierarchyParams { min_cluster: 10, ..Default::default() };
        let mut tree = build_hierarchy(&dm, params).unwrap();
        tree.assign_representatives(&dm, None);
        let views = layout_levels(&dm, &tree, None, 7, &ViewParams::default()).unwrap();
        assert!(views.len() >= 2);
        for w in views.windows(2) {
            assert!(cyclic_order_preserved(&w[0], &w[1]));
        }
        for v in &views {
            let ids = v.arch_ids();
            let unique: HashSet<u64> = ids.iter().copied().collect();
            assert_eq!(unique.len(), ids.len());
        }
    }
}
