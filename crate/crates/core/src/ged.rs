//! Pairwise edit distances without the edit graph: an exact A* search over
//! the space's edit operations, and a bipartite-assignment upper bound that
//! runs in O(L³) for spaces too large to enumerate.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::assignment;
use crate::error::{Error, Result};
use crate::space::{Architecture, OpId, Space};

/// Default cap on A* state expansions.
pub const DEFAULT_ASTAR_BUDGET: usize = 2_000_000;

/// Largest combined layer count accepted by [`exact_ged_astar`].
pub const MAX_ASTAR_LAYERS: usize = 16;

/// Minimum total edit cost turning `a` into `b`, by A* over one-edit moves.
///
/// The heuristic is the optimal unordered alignment of the two op multisets
/// under the shortest-substitution-chain cost between ops, plus one edge
/// toggle per differing edge. Each edit lowers it by at most its own cost,
/// so it is consistent and the first time `b` is popped its cost is exact.
pub fn exact_ged_astar(space: &Space, a: &Architecture, b: &Architecture) -> Result<f64> {
    exact_ged_astar_with_budget(space, a, b, DEFAULT_ASTAR_BUDGET)
}

pub fn exact_ged_astar_with_budget(
    space: &Space,
    a: &Architecture,
    b: &Architecture,
    budget: usize,
) -> Result<f64> {
    for arch in [a, b] {
        if !space.contains(arch) {
            return Err(Error::NotInSpace(space.arch_id(arch)));
        }
    }
    let layers = space.layers(a).len() + space.layers(b).len();
    if layers > MAX_ASTAR_LAYERS {
        return Err(Error::InvalidArgument(format!(
            "A* oracle supports at most {MAX_ASTAR_LAYERS} combined layers, got {layers}"
        )));
    }
    let units = AstarSearch::new(space, b).run(a, budget)?;
    Ok(space.dequantize(units))
}

struct AstarSearch<'a> {
    space: &'a Space,
    target: &'a Architecture,
    target_id: u64,
    closure: Vec<Vec<u64>>,
    /// Alignment cost by sorted op multiset.
    alignments: RefCell<HashMap<Vec<OpId>, u64>>,
}

impl<'a> AstarSearch<'a> {
    fn new(space: &'a Space, target: &'a Architecture) -> Self {
        AstarSearch {
            space,
            target,
            target_id: space.arch_id(target),
            closure: op_closure(space),
            alignments: RefCell::new(HashMap::new()),
        }
    }

    fn heuristic(&self, arch: &Architecture) -> u64 {
        let mut key = arch.ops().to_vec();
        key.sort_unstable();
        let h = *self.alignments.borrow_mut().entry(key).or_insert_with(|| {
            let m = arch.ops().len();
            if m == 0 {
                return 0;
            }
            let mut cost = Vec::with_capacity(m * m);
            for &x in arch.ops() {
                for &y in self.target.ops() {
                    cost.push(self.closure[x as usize][y as usize] as f64);
                }
            }
            assignment::solve(&cost, m).1 as u64
        });
        let toggles = (arch.edges() ^ self.target.edges()).count_ones() as u64;
        h + toggles * self.space.ins_del_units()
    }

    fn run(&self, start: &Architecture, budget: usize) -> Result<u64> {
        let start_id = self.space.arch_id(start);
        let mut best: HashMap<u64, u64> = HashMap::new();
        let mut closed: HashMap<u64, ()> = HashMap::new();
        let mut open = BinaryHeap::new();
        best.insert(start_id, 0);
        open.push(Reverse((self.heuristic(start), Reverse(0u64), start_id)));
        let mut expanded = 0usize;
        while let Some(Reverse((_, Reverse(g), id))) = open.pop() {
            if id == self.target_id {
                return Ok(g);
            }
            if closed.contains_key(&id) || best.get(&id).is_some_and(|&b| g > b) {
                continue;
            }
            closed.insert(id, ());
            expanded += 1;
            if expanded > budget {
                return Err(Error::BudgetExceeded(budget));
            }
            let arch = self.space.decode(id)?;
            let mut moves = Vec::new();
            self.space.for_each_neighbor(&arch, |n, from, to| {
                let w = match (from, to) {
                    (Some(f), Some(t)) => self.space.edit_units(f, t),
                    _ => self.space.ins_del_units(),
                };
                moves.push((n, w));
            });
            for (next, w) in moves {
                let nid = self.space.arch_id(&next);
                let ng = g + w;
                if closed.contains_key(&nid) || best.get(&nid).is_some_and(|&b| ng >= b) {
                    continue;
                }
                best.insert(nid, ng);
                open.push(Reverse((ng + self.heuristic(&next), Reverse(ng), nid)));
            }
        }
        Err(Error::Disconnected(start_id, self.target_id))
    }
}

/// Cheapest chain of substitutions (through any intermediate ops, deletion
/// and insertion included) between every pair of ops, in quantized units.
fn op_closure(space: &Space) -> Vec<Vec<u64>> {
    let c = space.num_ops();
    let mut d: Vec<Vec<u64>> = (0..c)
        .map(|i| (0..c).map(|j| space.edit_units(i as OpId, j as OpId)).collect())
        .collect();
    for k in 0..c {
        for i in 0..c {
            for j in 0..c {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Edit-path cost induced by an optimal layer assignment between `a` and
/// `b`. Never below the exact distance.
///
/// The `(L_a + L_b)²` matrix has a substitution block, a deletion block and
/// an insertion block with `insertion_deletion_cost` on the diagonal, and a
/// zero block. Layers are anchored to their slot or node, so substituting
/// across positions is not an edit of the space and is forbidden; edge
/// differences (topology spaces) each add one toggle.
pub fn approx_ged_bipartite(space: &Space, a: &Architecture, b: &Architecture) -> f64 {
    space.dequantize(bipartite_units(space, a, b))
}

pub(crate) fn bipartite_units(space: &Space, a: &Architecture, b: &Architecture) -> u64 {
    let la = space.layers(a);
    let lb = space.layers(b);
    let (na, nb) = (la.len(), lb.len());
    let n = na + nb;
    let del = space.ins_del_units() as f64;
    let mut cost = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = match (i < na, j < nb) {
                (true, true) => {
                    let ((pa, oa), (pb, ob)) = (la[i], lb[j]);
                    if pa == pb {
                        space.edit_units(oa, ob) as f64
                    } else {
                        f64::INFINITY
                    }
                }
                (true, false) if j - nb == i => del,
                (false, true) if i - na == j => del,
                (false, false) => 0.0,
                _ => f64::INFINITY,
            };
        }
    }
    let (_, total) = assignment::solve(&cost, n);
    let toggles = (a.edges() ^ b.edges()).count_ones() as u64;
    total as u64 + toggles * space.ins_del_units()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{OpKind, OpType, SpaceSpec};

    #[test]
    fn identical_is_zero() {
        let space = Space::new(SpaceSpec::nas201()).unwrap();
        let a = space.nth(777).unwrap();
        assert_eq!(exact_ged_astar(&space, &a, &a).unwrap(), 0.0);
        assert_eq!(approx_ged_bipartite(&space, &a, &a), 0.0);
    }

    #[test]
    fn single_substitution() {
        let space = Space::new(SpaceSpec::nas201()).unwrap();
        let a = Architecture::op_slot(vec![1, 2, 3, 4, 3, 2]);
        let mut ops = a.ops().to_vec();
        ops[2] = 2;
        let b = Architecture::op_slot(ops);
        assert_eq!(exact_ged_astar(&space, &a, &b).unwrap(), 1.0);
        ops = a.ops().to_vec();
        ops[5] = 0;
        let c = Architecture::op_slot(ops);
        assert_eq!(exact_ged_astar(&space, &a, &c).unwrap(), 5.0);
    }

    #[test]
    fn cheaper_chain_through_third_op() {
        // direct a->b costs 3, a->c->b costs 2
        let mut spec = SpaceSpec::op_slot(
            2,
            vec![
                OpType::new("a", OpKind::Conv),
                OpType::new("b", OpKind::Conv),
                OpType::new("c", OpKind::Conv),
            ],
        );
        spec.cost_matrix =
            Some(vec![vec![0.0, 3.0, 1.0], vec![3.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        let space = Space::new(spec).unwrap();
        let x = Architecture::op_slot(vec![0, 0]);
        let y = Architecture::op_slot(vec![1, 1]);
        assert_eq!(exact_ged_astar(&space, &x, &y).unwrap(), 4.0);
        assert_eq!(approx_ged_bipartite(&space, &x, &y), 6.0);
    }

    #[test]
    fn topology_edges_count() {
        let spec = SpaceSpec::topology(
            4,
            3,
            vec![OpType::new("conv3x3", OpKind::Conv), OpType::new("conv1x1", OpKind::Conv)],
        );
        let space = Space::new(spec).unwrap();
        let a = Architecture::topology(0b000111, vec![0, 0]);
        let b = Architecture::topology(0b111000, vec![1, 0]);
        // three removals, three additions, one relabel
        assert_eq!(exact_ged_astar(&space, &a, &b).unwrap(), 31.0);
        assert_eq!(approx_ged_bipartite(&space, &a, &b), 31.0);
    }

    #[test]
    fn budget_is_enforced() {
        let space = Space::new(SpaceSpec::nas201()).unwrap();
        let a = Architecture::op_slot(vec![0; 6]);
        let b = Architecture::op_slot(vec![3; 6]);
        assert!(matches!(
            exact_ged_astar_with_budget(&space, &a, &b, 2),
            Err(Error::BudgetExceeded(2))
        ));
    }

    #[test]
    fn too_many_layers() {
        let spec = SpaceSpec::op_slot(9, vec![OpType::new("c", OpKind::Conv)]);
        let space = Space::new(spec).unwrap();
        let a = Architecture::op_slot(vec![0; 9]);
        assert!(matches!(exact_ged_astar(&space, &a, &a), Err(Error::InvalidArgument(_))));
    }
}
