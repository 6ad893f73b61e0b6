//! Assignment of a cluster's architectures to hex cells, minimizing the sum
//! of distances between architectures on adjacent cells.

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::layout::hex::HexGrid;

pub const DEFAULT_MAX_PASSES: usize = 50;

/// Improvements smaller than this are treated as ties.
const EPS: f64 = 1e-9;

/// A feasible assignment π of members to cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    /// Matrix indices of the members.
    pub members: Vec<usize>,
    /// Cell of each member.
    pub cell_of: Vec<usize>,
    /// Member (position in `members`) on each cell.
    pub occupant: Vec<Option<usize>>,
    /// Cells held empty around a summary glyph.
    pub reserved: Vec<bool>,
    pub is_rep: Vec<bool>,
}

impl Placement {
    fn empty(members: &[usize], grid: &HexGrid) -> Self {
        Placement {
            members: members.to_vec(),
            cell_of: vec![usize::MAX; members.len()],
            occupant: vec![None; grid.len()],
            reserved: vec![false; grid.len()],
            is_rep: vec![false; members.len()],
        }
    }

    fn put(&mut self, member: usize, cell: usize) {
        self.cell_of[member] = cell;
        self.occupant[cell] = Some(member);
    }

    /// Injective, consistent, and respecting every glyph reservation.
    pub fn is_feasible(&self, grid: &HexGrid) -> bool {
        let mut seen = vec![false; grid.len()];
        for (m, &c) in self.cell_of.iter().enumerate() {
            if c >= grid.len() || seen[c] || self.occupant[c] != Some(m) || self.reserved[c] {
                return false;
            }
            seen[c] = true;
            if self.is_rep[m]
                && (grid.neighbors(c).len() != 6
                    || grid.neighbors(c).iter().any(|&n| !self.reserved[n]))
            {
                return false;
            }
        }
        self.occupant.iter().enumerate().all(|(c, o)| o.is_none_or(|m| self.cell_of[m] == c))
    }

    /// The 7 cells of each representative's glyph: its own and its ring.
    pub fn glyph_cells(&self, grid: &HexGrid, member: usize) -> Vec<usize> {
        let c = self.cell_of[member];
        std::iter::once(c).chain(grid.neighbors(c).iter().copied()).collect()
    }
}

/// Sum over members of the distances to the members on adjacent cells.
/// Each adjacent pair is counted from both ends.
pub fn layout_objective(p: &Placement, dm: &DistanceMatrix, grid: &HexGrid) -> f64 {
    let mut total = 0.0;
    for (m, &c) in p.cell_of.iter().enumerate() {
        for &nb in grid.neighbors(c) {
            if let Some(o) = p.occupant[nb] {
                total += dm.get(p.members[m], p.members[o]);
            }
        }
    }
    total
}

/// Representatives (in the given order) first, each on the first cell whose
/// whole ring is inside the grid and free; then the free cells in grid order,
/// each taking the unplaced member with the smallest added distance to its
/// already-placed neighbors.
pub fn greedy_assign(
    members: &[usize],
    dm: &DistanceMatrix,
    grid: &HexGrid,
    reps: &[usize],
) -> Result<Placement> {
    greedy_assign_from(members, dm, grid, reps, None)
}

/// [`greedy_assign`] with member `first` (a matrix index) put on the first
/// free cell instead of the most central member.
pub fn greedy_assign_from(
    members: &[usize],
    dm: &DistanceMatrix,
    grid: &HexGrid,
    reps: &[usize],
    first: Option<usize>,
) -> Result<Placement> {
    let overflow = || Error::GridOverflow { cells: grid.len(), members: members.len(), reps: reps.len() };
    if grid.len() < members.len() + 6 * reps.len() {
        return Err(overflow());
    }
    let mut p = Placement::empty(members, grid);
    let mut placed = vec![false; members.len()];

    for &rep in reps {
        let m = members
            .iter()
            .position(|&x| x == rep)
            .ok_or_else(|| Error::InvalidArgument(format!("representative {rep} is not a member")))?;
        let cell = (0..grid.len())
            .find(|&c| {
                grid.is_interior(c)
                    && p.occupant[c].is_none()
                    && !p.reserved[c]
                    && grid.neighbors(c).iter().all(|&n| p.occupant[n].is_none() && !p.reserved[n])
            })
            .ok_or_else(overflow)?;
        p.put(m, cell);
        p.is_rep[m] = true;
        placed[m] = true;
        for &n in grid.neighbors(cell) {
            p.reserved[n] = true;
        }
    }

    let mut remaining = members.len() - reps.len();
    // tie-breaks: distance to everything placed so far, then to all members
    let mut to_placed = vec![0.0f64; members.len()];
    let mut forced = match first {
        Some(f) => match members.iter().position(|&x| x == f) {
            Some(m) if !placed[m] => Some(m),
            _ => return Err(Error::InvalidArgument(format!("{f} is not a free member"))),
        },
        None => None,
    };
    let centrality: Vec<f64> =
        members.iter().map(|&a| members.iter().map(|&b| dm.get(a, b)).sum()).collect();
    for c in 0..grid.len() {
        if remaining == 0 {
            break;
        }
        if p.occupant[c].is_some() || p.reserved[c] {
            continue;
        }
        if let Some(f) = forced.take() {
            p.put(f, c);
            placed[f] = true;
            remaining -= 1;
            for (x, acc) in to_placed.iter_mut().enumerate() {
                *acc += dm.get(members[x], members[f]);
            }
            continue;
        }
        let neighbors: Vec<usize> =
            grid.neighbors(c).iter().filter_map(|&n| p.occupant[n]).collect();
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for m in 0..members.len() {
            if placed[m] {
                continue;
            }
            let added: f64 = neighbors.iter().map(|&o| dm.get(members[m], members[o])).sum();
            let key = (added, to_placed[m], centrality[m], m);
            if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                best = Some(key);
            }
        }
        let (_, _, _, m) = best.expect("unplaced member remains");
        p.put(m, c);
        placed[m] = true;
        remaining -= 1;
        for (x, acc) in to_placed.iter_mut().enumerate() {
            *acc += dm.get(members[x], members[m]);
        }
    }
    if remaining > 0 {
        return Err(overflow());
    }
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct Refined {
    pub placement: Placement,
    pub passes: usize,
    /// False when `max_passes` ran out before reaching a local optimum.
    pub converged: bool,
    pub swaps: usize,
}

/// Best-improvement 2-swaps in a fixed scan order. A move exchanges the
/// cells of two non-representative members, or moves one onto a free
/// unreserved cell. Stops when a full pass finds no improving move.
pub fn swap_refine(p: Placement, dm: &DistanceMatrix, grid: &HexGrid, max_passes: usize) -> Refined {
    let frozen = p.is_rep.clone();
    swap_refine_frozen(p, dm, grid, max_passes, &frozen)
}

pub(crate) fn swap_refine_frozen(
    mut p: Placement,
    dm: &DistanceMatrix,
    grid: &HexGrid,
    max_passes: usize,
    frozen: &[bool],
) -> Refined {
    let mut passes = 0;
    let mut swaps = 0;
    let mut converged = false;
    while passes < max_passes {
        passes += 1;
        let mut improved = false;
        for i in 0..p.members.len() {
            if frozen[i] {
                continue;
            }
            if let Some((delta, target)) = best_move(&p, dm, grid, i, frozen) {
                if delta < -EPS {
                    apply_move(&mut p, i, target);
                    swaps += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            converged = true;
            break;
        }
    }
    Refined { placement: p, passes, converged, swaps }
}

/// Cheapest move of member `i`: to the cell of another movable member or
/// to a free cell. Returns (objective change, target cell).
pub(crate) fn best_move(
    p: &Placement,
    dm: &DistanceMatrix,
    grid: &HexGrid,
    i: usize,
    frozen: &[bool],
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for cell in 0..grid.len() {
        if cell == p.cell_of[i] || p.reserved[cell] {
            continue;
        }
        let j = p.occupant[cell];
        if j.is_some_and(|j| frozen[j]) {
            continue;
        }
        let delta = move_delta(p, dm, grid, i, cell);
        if best.is_none_or(|(d, _)| delta < d) {
            best = Some((delta, cell));
        }
    }
    best
}

/// Objective change when member `i` moves to `cell` and that cell's
/// occupant, if any, moves to `i`'s cell.
pub(crate) fn move_delta(p: &Placement, dm: &DistanceMatrix, grid: &HexGrid, i: usize, cell: usize) -> f64 {
    let ci = p.cell_of[i];
    let j = p.occupant[cell];
    let cost_at = |x: usize, c: usize| -> f64 {
        grid.neighbors(c)
            .iter()
            .filter_map(|&n| p.occupant[n])
            .filter(|&o| o != i && Some(o) != j)
            .map(|o| dm.get(p.members[x], p.members[o]))
            .sum()
    };
    let mut delta = cost_at(i, cell) - cost_at(i, ci);
    if let Some(j) = j {
        delta += cost_at(j, ci) - cost_at(j, cell);
    }
    2.0 * delta
}

fn apply_move(p: &mut Placement, i: usize, cell: usize) {
    let ci = p.cell_of[i];
    let j = p.occupant[cell];
    p.put(i, cell);
    match j {
        Some(j) => p.put(j, ci),
        None => p.occupant[ci] = None,
    }
}

/// Whether no single move of a movable member lowers the objective.
pub fn is_swap_optimal(p: &Placement, dm: &DistanceMatrix, grid: &HexGrid) -> bool {
    (0..p.members.len())
        .filter(|&i| !p.is_rep[i])
        .all(|i| best_move(p, dm, grid, i, &p.is_rep).is_none_or(|(d, _)| d >= -EPS))
}

pub const DEFAULT_STARTS: usize = 8;

#[derive(Clone, Debug)]
pub struct ClusterPlacement {
    pub grid: HexGrid,
    pub placement: Placement,
    /// Eq. 1 value of the greedy start that was kept.
    pub greedy_objective: f64,
    pub objective: f64,
}

/// Grid sizing, greedy construction and swap refinement for one cluster.
/// The greedy pass is repeated with each of the `starts` most central
/// non-representative members on the first free cell; the best refined
/// result is kept. A grid too tight for the glyph rings is regrown once.
pub fn layout_cluster(
    members: &[usize],
    dm: &DistanceMatrix,
    reps: &[usize],
    max_passes: usize,
    starts: usize,
) -> Result<ClusterPlacement> {
    let mut grid = HexGrid::for_cluster(members.len(), reps.len());
    if let Err(e) = greedy_assign(members, dm, &grid, reps) {
        match e {
            Error::GridOverflow { .. } => grid = HexGrid::with_cells(4 * (members.len() + 7 * reps.len())),
            e => return Err(e),
        }
    }
    let mut seeds: Vec<(f64, usize)> = members
        .iter()
        .filter(|m| !reps.contains(m))
        .map(|&a| (members.iter().map(|&b| dm.get(a, b)).sum(), a))
        .collect();
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let firsts: Vec<Option<usize>> = if seeds.is_empty() {
        vec![None]
    } else {
        seeds.iter().take(starts.max(1)).map(|s| Some(s.1)).collect()
    };
    let mut best: Option<ClusterPlacement> = None;
    for first in firsts {
        let greedy = greedy_assign_from(members, dm, &grid, reps, first)?;
        let greedy_objective = layout_objective(&greedy, dm, &grid);
        let placement = swap_refine(greedy, dm, &grid, max_passes).placement;
        let objective = layout_objective(&placement, dm, &grid);
        if best.as_ref().is_none_or(|b| objective < b.objective - EPS) {
            best = Some(ClusterPlacement { grid: grid.clone(), placement, greedy_objective, objective });
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::Backend;

    fn line_metric(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn((0..n as u64).collect(), Backend::ExactApsp, |i, j| {
            (i as f64 - j as f64).abs()
        })
    }

    #[test]
    fn single_member_scores_zero() {
        let dm = line_metric(1);
        let grid = HexGrid::for_cluster(1, 0);
        let p = greedy_assign(&[0], &dm, &grid, &[]).unwrap();
        assert_eq!(layout_objective(&p, &dm, &grid), 0.0);
    }

    #[test]
    fn adjacent_pair_counted_twice() {
        let dm = DistanceMatrix::from_fn(vec![0, 1], Backend::ExactApsp, |_, _| 3.0);
        let grid = HexGrid::for_cluster(2, 0);
        let p = greedy_assign(&[0, 1], &dm, &grid, &[]).unwrap();
        assert_eq!(layout_objective(&p, &dm, &grid), 6.0);
    }

    #[test]
    fn zero_distances_score_zero() {
        let dm = DistanceMatrix::from_fn((0..9).collect(), Backend::ExactApsp, |_, _| 0.0);
        let grid = HexGrid::for_cluster(9, 0);
        let p = greedy_assign(&(0..9).collect::<Vec<_>>(), &dm, &grid, &[]).unwrap();
        assert_eq!(layout_objective(&p, &dm, &grid), 0.0);
    }

    #[test]
    fn representative_reserves_ring() {
        let dm = line_metric(12);
        let members: Vec<usize> = (0..12).collect();
        let grid = HexGrid::for_cluster(12, 1);
        let p = greedy_assign(&members, &dm, &grid, &[5]).unwrap();
        assert!(p.is_feasible(&grid));
        assert!(p.is_rep[5]);
        assert_eq!(p.glyph_cells(&grid, 5).len(), 7);
        let refined = swap_refine(p.clone(), &dm, &grid, 50);
        assert_eq!(refined.placement.cell_of[5], p.cell_of[5]);
        assert!(refined.placement.is_feasible(&grid));
    }

    #[test]
    fn tight_grid_is_regrown() {
        // 3 members + 2 glyphs = 15 cells, but two disjoint 7-cell blocks
        // with interior centers need more room
        let dm = line_metric(3);
        let c = layout_cluster(&[0, 1, 2], &dm, &[0, 1], 50, DEFAULT_STARTS).unwrap();
        assert!(c.grid.len() > 15);
        assert!(c.placement.is_feasible(&c.grid));
    }

    #[test]
    fn regrown_grid_always_fits() {
        for reps in 1..=5 {
            for n in reps..=60 {
                let dm = line_metric(n);
                let members: Vec<usize> = (0..n).collect();
                let c = layout_cluster(&members, &dm, &members[..reps], 5, 2).unwrap();
                assert!(c.placement.is_feasible(&c.grid), "n={n} reps={reps}");
            }
        }
    }

    #[test]
    fn refine_does_not_worsen() {
        let dm = line_metric(20);
        let members: Vec<usize> = (0..20).rev().collect();
        let grid = HexGrid::for_cluster(20, 0);
        let p = greedy_assign(&members, &dm, &grid, &[]).unwrap();
        let before = layout_objective(&p, &dm, &grid);
        let r = swap_refine(p, &dm, &grid, 50);
        assert!(layout_objective(&r.placement, &dm, &grid) <= before);
        assert!(r.converged);
        assert!(is_swap_optimal(&r.placement, &dm, &grid));
    }
}
