//! Top-down K-medoids hierarchy over a distance matrix, cluster-aware
//! sampling for display, and representative selection.
//!
//! All indices here are row indices of the [`DistanceMatrix`].

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

pub const MAX_KMEDOIDS_ITERATIONS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 5;
pub const DEFAULT_K_RANGE: (usize, usize) = (2, 10);
pub const DEFAULT_MAX_DEPTH: usize = 3;
pub const DEFAULT_MIN_CLUSTER: usize = 40;
pub const MIN_PER_CLUSTER: usize = 10;
pub const REPRESENTATIVE_POOL: usize = 10;
pub const MAX_REPRESENTATIVES: usize = 5;

#[derive(Clone, Debug)]
pub struct KMedoids {
    /// Cluster slot (0..k) of each member, aligned with the member list.
    pub assignment: Vec<usize>,
    /// Matrix index of each cluster's medoid.
    pub medoids: Vec<usize>,
    /// Sum of member-to-medoid distances.
    pub objective: f64,
    /// Objective after every assignment step.
    pub trace: Vec<f64>,
}

/// Members that are not at distance zero from an earlier member.
fn distinct_members(dm: &DistanceMatrix, members: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &m in members {
        if out.iter().all(|&o| dm.get(o, m) > 0.0) {
            out.push(m);
        }
    }
    out
}

fn check_k(dm: &DistanceMatrix, members: &[usize], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > members.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} outside 1..={}",
            members.len()
        )));
    }
    let distinct = distinct_members(dm, members);
    if k > distinct.len() {
        return Err(Error::DegenerateK { k, distinct: distinct.len() });
    }
    Ok(distinct)
}

/// K-medoids with a seeded random start.
pub fn kmedoids(dm: &DistanceMatrix, members: &[usize], k: usize, seed: u64) -> Result<KMedoids> {
    let distinct = check_k(dm, members, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<usize> = distinct.choose_multiple(&mut rng, k).copied().collect();
    Ok(kmedoids_from(dm, members, init))
}

/// The deterministic start of Park and Jun: the k members with the smallest
/// normalized total distance.
pub fn park_jun_init(dm: &DistanceMatrix, members: &[usize], k: usize) -> Result<Vec<usize>> {
    let distinct = check_k(dm, members, k)?;
    let totals: Vec<f64> =
        members.iter().map(|&l| members.iter().map(|&i| dm.get(l, i)).sum()).collect();
    let mut score: Vec<(f64, usize)> = distinct
        .iter()
        .map(|&j| {
            let v: f64 = members
                .iter()
                .zip(&totals)
                .filter(|(_, &t)| t > 0.0)
                .map(|(&i, &t)| dm.get(i, j) / t)
                .sum();
            (v, j)
        })
        .collect();
    score.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(score.into_iter().take(k).map(|(_, j)| j).collect())
}

/// Alternating assign/update from the given medoids until they stop
/// changing or [`MAX_KMEDOIDS_ITERATIONS`] rounds pass.
pub fn kmedoids_from(dm: &DistanceMatrix, members: &[usize], mut medoids: Vec<usize>) -> KMedoids {
    let k = medoids.len();
    let mut assignment = vec![0usize; members.len()];
    let mut trace = Vec::new();
    for _ in 0..MAX_KMEDOIDS_ITERATIONS {
        let objective = assign(dm, members, &medoids, &mut assignment);
        trace.push(objective);

        let mut changed = false;
        for c in 0..k {
            let cluster: Vec<usize> = members
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(&m, _)| m)
                .collect();
            let current = medoids[c];
            let cost = |x: usize| cluster.iter().map(|&m| dm.get(x, m)).sum::<f64>();
            let mut best = (cost(current), current);
            for &x in &cluster {
                let cx = cost(x);
                if cx < best.0 {
                    best = (cx, x);
                }
            }
            if best.1 != current {
                medoids[c] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let objective = assign(dm, members, &medoids, &mut assignment);
    if trace.last() != Some(&objective) {
        trace.push(objective);
    }
    KMedoids { assignment, medoids, objective, trace }
}

fn assign(dm: &DistanceMatrix, members: &[usize], medoids: &[usize], out: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (slot, &m) in out.iter_mut().zip(members) {
        // a medoid always belongs to its own cluster
        if let Some(c) = medoids.iter().position(|&x| x == m) {
            *slot = c;
            continue;
        }
        let mut best = (f64::INFINITY, 0);
        for (c, &x) in medoids.iter().enumerate() {
            let d = dm.get(m, x);
            if d < best.0 {
                best = (d, c);
            }
        }
        *slot = best.1;
        total += best.0;
    }
    total
}

/// Per-K record of the grid search.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct KScore {
    pub k: usize,
    /// Best objective over the restarts.
    pub objective: f64,
    /// Mean member-to-medoid distance.
    pub mean_distance: f64,
    /// Mean distance between medoids.
    pub separation: f64,
    /// Selection score: `mean_distance / separation`.
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct GridSearch {
    pub best_k: usize,
    pub best: KMedoids,
    pub curve: Vec<KScore>,
}

/// Chooses K in `k_range` by the smallest average distance to the cluster
/// medoid, taken relative to the average distance between medoids. The raw
/// mean alone shrinks with every extra medoid; the ratio only drops when
/// the extra medoid buys more cohesion than it costs in separation. Ties go
/// to the smaller K.
pub fn grid_search_k(
    dm: &DistanceMatrix,
    members: &[usize],
    k_range: (usize, usize),
    seed: u64,
) -> Result<GridSearch> {
    let (lo, hi) = k_range;
    if lo < 1 || lo > hi || hi > members.len() {
        return Err(Error::InvalidArgument(format!(
            "K range [{lo}, {hi}] outside [1, {}]",
            members.len()
        )));
    }
    let runs: Vec<Result<(KScore, KMedoids)>> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let mut best = kmedoids_from(dm, members, park_jun_init(dm, members, k)?);
            for r in 1..DEFAULT_RESTARTS {
                let run = kmedoids(dm, members, k, seed.wrapping_add(r as u64 * 7919 + k as u64))?;
                if run.objective < best.objective {
                    best = run;
                }
            }
            let mean_distance = best.objective / members.len() as f64;
            let separation = mean_pairwise(dm, &best.medoids);
            let score = if mean_distance == 0.0 {
                0.0
            } else if separation == 0.0 {
                f64::INFINITY
            } else {
                mean_distance / separation
            };
            Ok((KScore { k, objective: best.objective, mean_distance, separation, score }, best))
        })
        .collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, KMedoids)> = None;
    for run in runs {
        let (ks, km) = run?;
        if best.as_ref().is_none_or(|b| ks.score < b.0) {
            best = Some((ks.score, ks.k, km));
        }
        curve.push(ks);
    }
    let (_, best_k, best) = best.expect("non-empty range");
    Ok(GridSearch { best_k, best, curve })
}

fn mean_pairwise(dm: &DistanceMatrix, points: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, &i) in points.iter().enumerate() {
        for &j in &points[a + 1..] {
            sum += dm.get(i, j);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Member minimizing the total distance to the others (ties: lowest index).
pub fn medoid_of(dm: &DistanceMatrix, members: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &x in members {
        let total: f64 = members.iter().map(|&m| dm.get(x, m)).sum();
        if total < best.0 || (total == best.0 && x < best.1) {
            best = (total, x);
        }
    }
    best.1
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct NodeStats {
    pub size: usize,
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterNode {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    /// Matrix indices, ascending.
    pub members: Vec<usize>,
    pub medoid: usize,
    pub children: Vec<usize>,
    pub representatives: Vec<usize>,
    /// Grid-search curve when the node was split.
    pub k_curve: Vec<KScore>,
    pub stats: Option<NodeStats>,
}

/// Cluster hierarchy; node 0 is the root and covers every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTree {
    pub nodes: Vec<ClusterNode>,
}

#[derive(Clone, Copy, Debug)]
pub struct HierarchyParams {
    pub max_depth: usize,
    pub min_cluster: usize,
    pub k_range: (usize, usize),
    pub seed: u64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        HierarchyParams {
            max_depth: DEFAULT_MAX_DEPTH,
            min_cluster: DEFAULT_MIN_CLUSTER,
            k_range: DEFAULT_K_RANGE,
            seed: 0,
        }
    }
}

/// Splits top-down with [`grid_search_k`] until `max_depth` or nodes below
/// `min_cluster` members.
pub fn build_hierarchy(dm: &DistanceMatrix, params: HierarchyParams) -> Result<ClusterTree> {
    let all: Vec<usize> = (0..dm.len()).collect();
    if all.is_empty() {
        return Err(Error::InvalidArgument("empty distance matrix".into()));
    }
    let mut tree = ClusterTree { nodes: Vec::new() };
    tree.nodes.push(ClusterNode {
        id: 0,
        level: 0,
        parent: None,
        medoid: medoid_of(dm, &all),
        members: all,
        children: Vec::new(),
        representatives: Vec::new(),
        k_curve: Vec::new(),
        stats: None,
    });
    let mut frontier = vec![0usize];
    while let Some(id) = frontier.pop() {
        let (level, members) = (tree.nodes[id].level, tree.nodes[id].members.clone());
        if level >= params.max_depth || members.len() < params.min_cluster {
            continue;
        }
        let distinct = distinct_members(dm, &members).len();
        let hi = params.k_range.1.min(distinct);
        let lo = params.k_range.0.max(2);
        if hi < lo {
            continue;
        }
        let search = grid_search_k(dm, &members, (lo, hi), params.seed ^ id as u64)?;
        let mut groups: Vec<(usize, Vec<usize>)> = search
            .best
            .medoids
            .iter()
            .enumerate()
            .map(|(c, &med)| {
                let group = members
                    .iter()
                    .zip(&search.best.assignment)
                    .filter(|(_, &a)| a == c)
                    .map(|(&m, _)| m)
                    .collect();
                (med, group)
            })
            .collect();
        groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
        tree.nodes[id].k_curve = search.curve;
        for (_, mut group) in groups {
            group.sort_unstable();
            let child = tree.nodes.len();
            tree.nodes.push(ClusterNode {
                id: child,
                level: level + 1,
                parent: Some(id),
                medoid: medoid_of(dm, &group),
                members: group,
                children: Vec::new(),
                representatives: Vec::new(),
                k_curve: Vec::new(),
                stats: None,
            });
            tree.nodes[id].children.push(child);
            frontier.push(child);
        }
    }
    Ok(tree)
}

impl ClusterTree {
    pub fn root(&self) -> &ClusterNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> Option<&ClusterNode> {
        self.nodes.get(id)
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Nodes shown at navigation `level`: the nodes on that level plus
    /// leaves that stopped splitting above it.
    pub fn clusters_at_level(&self, level: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.level == level || (n.level < level && n.children.is_empty()))
            .map(|n| n.id)
            .collect()
    }

    /// Fills per-node accuracy statistics from `accuracy` (one value per
    /// matrix row, NaN for unknown).
    pub fn attach_metrics(&mut self, accuracy: &[f64]) {
        for node in &mut self.nodes {
            let known: Vec<f64> =
                node.members.iter().map(|&m| accuracy[m]).filter(|a| !a.is_nan()).collect();
            node.stats = if known.is_empty() {
                None
            } else {
                Some(NodeStats {
                    size: node.members.len(),
                    mean_accuracy: known.iter().sum::<f64>() / known.len() as f64,
                    max_accuracy: known.iter().cloned().fold(f64::MIN, f64::max),
                })
            };
        }
    }

    /// Chooses representatives for every node.
    pub fn assign_representatives(&mut self, dm: &DistanceMatrix, accuracy: Option<&[f64]>) {
        for i in 0..self.nodes.len() {
            let reps = select_representatives(&self.nodes[i], dm, accuracy, MAX_REPRESENTATIVES);
            self.nodes[i].representatives = reps;
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Quota {
    pub cluster: usize,
    pub size: usize,
    pub quota: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub level: usize,
    /// Selected matrix indices, grouped by cluster in quota order.
    pub selected: Vec<usize>,
    pub quotas: Vec<Quota>,
}

impl SampleSet {
    pub fn for_cluster(&self, cluster: usize) -> &[usize] {
        let mut start = 0;
        for q in &self.quotas {
            if q.cluster == cluster {
                return &self.selected[start..start + q.quota];
            }
            start += q.quota;
        }
        &[]
    }
}

/// `max(10, round(budget · N_i / n))`, capped at `N_i`.
pub fn quota(budget: usize, size: usize, total: usize) -> usize {
    let share = (budget as f64 * size as f64 / total as f64).round() as usize;
    share.max(MIN_PER_CLUSTER).min(size)
}

/// Samples for display at navigation `level`, keeping relative cluster
/// sizes with a floor of ten per cluster.
pub fn sample_cluster_aware(
    tree: &ClusterTree,
    dm: &DistanceMatrix,
    level: usize,
    budget: usize,
) -> Result<SampleSet> {
    let clusters = tree.clusters_at_level(level);
    let mut set = sample_clusters(tree, dm, &clusters, budget, &[])?;
    set.level = level;
    Ok(set)
}

/// Cluster-aware sampling over an explicit set of clusters. Within each
/// cluster the medoid comes first, then members of `prefer[0]`, then of
/// `prefer[1]`, and so on, each tier in farthest-point order.
pub fn sample_clusters(
    tree: &ClusterTree,
    dm: &DistanceMatrix,
    clusters: &[usize],
    budget: usize,
    prefer: &[HashSet<usize>],
) -> Result<SampleSet> {
    let nodes: Vec<&ClusterNode> = clusters
        .iter()
        .map(|&c| tree.node(c).ok_or_else(|| Error::InvalidArgument(format!("no cluster {c}"))))
        .collect::<Result<_>>()?;
    let total: usize = nodes.iter().map(|n| n.members.len()).sum();
    let required = MIN_PER_CLUSTER * nodes.len();
    if budget < total && budget < required {
        return Err(Error::BudgetTooSmall { budget, required });
    }
    let mut selected = Vec::new();
    let mut quotas = Vec::new();
    for node in nodes {
        let size = node.members.len();
        let q = if budget >= total { size } else { quota(budget, size, total) };
        selected.extend(farthest_point_sample(dm, node, q, prefer));
        quotas.push(Quota { cluster: node.id, size, quota: q });
    }
    let level = clusters.first().and_then(|&c| tree.node(c)).map_or(0, |n| n.level);
    Ok(SampleSet { level, selected, quotas })
}

/// Medoid first, then repeatedly the member farthest from those chosen.
fn farthest_point_sample(
    dm: &DistanceMatrix,
    node: &ClusterNode,
    count: usize,
    prefer: &[HashSet<usize>],
) -> Vec<usize> {
    let members = &node.members;
    let mut chosen = vec![node.medoid];
    let mut taken: HashSet<usize> = chosen.iter().copied().collect();
    let mut nearest: Vec<f64> = members.iter().map(|&m| dm.get(m, node.medoid)).collect();
    while chosen.len() < count.min(members.len()) {
        let tier = prefer
            .iter()
            .find(|t| members.iter().any(|m| t.contains(m) && !taken.contains(m)));
        let mut best: Option<(f64, usize)> = None;
        for (i, &m) in members.iter().enumerate() {
            if taken.contains(&m) || tier.is_some_and(|t| !t.contains(&m)) {
                continue;
            }
            if best.is_none_or(|(d, _)| nearest[i] > d) {
                best = Some((nearest[i], i));
            }
        }
        let (_, i) = best.expect("members remain");
        let pick = members[i];
        chosen.push(pick);
        taken.insert(pick);
        for (j, &m) in members.iter().enumerate() {
            nearest[j] = nearest[j].min(dm.get(m, pick));
        }
    }
    chosen
}

/// Medoid first, then the subset of the node's ten most accurate members
/// that maximizes the smallest pairwise distance among all chosen, up to
/// `max_count` in total. Without accuracies the pool is the ten members
/// closest to the rest of the node.
pub fn select_representatives(
    node: &ClusterNode,
    dm: &DistanceMatrix,
    accuracy: Option<&[f64]>,
    max_count: usize,
) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = match accuracy {
        Some(acc) => node
            .members
            .iter()
            .map(|&m| (if acc[m].is_nan() { f64::NEG_INFINITY } else { acc[m] }, m))
            .collect(),
        None => node
            .members
            .iter()
            .map(|&m| (-node.members.iter().map(|&o| dm.get(m, o)).sum::<f64>(), m))
            .collect(),
    };
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let score_of = |m: usize| ranked.iter().find(|r| r.1 == m).map_or(0.0, |r| r.0);
    let pool: Vec<usize> = ranked
        .iter()
        .take(REPRESENTATIVE_POOL)
        .map(|r| r.1)
        .filter(|&m| m != node.medoid)
        .collect();
    let extra = max_count.saturating_sub(1).min(pool.len());
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for subset in combinations(pool.len(), extra) {
        let mut chosen = vec![node.medoid];
        chosen.extend(subset.iter().map(|&i| pool[i]));
        let spread = min_pairwise(dm, &chosen);
        let quality: f64 = chosen[1..].iter().map(|&m| score_of(m)).sum();
        let better = match &best {
            None => true,
            Some((s, q, _)) => spread > *s || (spread == *s && quality > *q),
        };
        if better {
            best = Some((spread, quality, chosen));
        }
    }
    best.map_or_else(|| vec![node.medoid], |b| b.2)
}

pub(crate) fn min_pairwise(dm: &DistanceMatrix, points: &[usize]) -> f64 {
    let mut min = f64::INFINITY;
    for (a, &i) in points.iter().enumerate() {
        for &j in &points[a + 1..] {
            min = min.min(dm.get(i, j));
        }
    }
    min
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}
