//! Architecture spaces: op vocabularies, cost model, canonical encodings,
//! one-edit neighborhoods and input→output path decomposition.
//!
//! Two families are supported. In an `op_slot` space every architecture is a
//! fixed DAG skeleton whose edges (slots) each carry one op, as in cell-based
//! benchmarks. In a `topology` space the interior nodes carry ops and the
//! edge set itself is part of the encoding (upper-triangular adjacency, so
//! every encoding is acyclic by construction).

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hard cap on the number of architectures a space may have before
/// enumeration refuses to run without an explicit limit.
pub const DEFAULT_SPACE_CAP: u64 = 5_000_000;

/// Largest node count accepted for topology spaces.
pub const MAX_TOPOLOGY_NODES: usize = 8;

/// Fractional bits used when quantizing edit costs.
const COST_FRACTION_BITS: i32 = 20;

pub type OpId = u8;

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Hash, Debug)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Conv,
    PoolMax,
    PoolAvg,
    Identity,
    None,
    Other,
}

impl OpKind {
    pub fn is_pool(self) -> bool {
        matches!(self, OpKind::PoolMax | OpKind::PoolAvg)
    }
}

#[derive(Serialize, Deserialize, Clone, PartialEq, Eq, Debug)]
pub struct OpType {
    pub name: String,
    pub kind: OpKind,
}

impl OpType {
    pub fn new(name: &str, kind: OpKind) -> Self {
        OpType { name: name.to_owned(), kind }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    OpSlot,
    Topology,
}

/// DAG positions of the slots of an `op_slot` space. Slot `i` is the edge
/// `edges[i]`; node 0 is the input and node `nodes - 1` the output.
#[derive(Serialize, Deserialize, Clone, PartialEq, Eq, Debug)]
pub struct Skeleton {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Skeleton {
    /// input → s0 → s1 → … → output
    pub fn chain(slots: usize) -> Self {
        Skeleton { nodes: slots + 1, edges: (0..slots).map(|i| [i, i + 1]).collect() }
    }
}

/// The on-disk space description.
#[derive(Serialize, Deserialize, Clone, PartialEq, Debug)]
pub struct SpaceSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edges: Option<usize>,
    pub ops: Vec<OpType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<Skeleton>,
}

fn default_version() -> u32 {
    1
}

impl SpaceSpec {
    pub fn op_slot(slots: usize, ops: Vec<OpType>) -> Self {
        SpaceSpec {
            version: 1,
            family: Family::OpSlot,
            slots: Some(slots),
            nodes: None,
            max_edges: None,
            ops,
            cost_matrix: None,
            skeleton: None,
        }
    }

    pub fn topology(nodes: usize, max_edges: usize, ops: Vec<OpType>) -> Self {
        SpaceSpec {
            version: 1,
            family: Family::Topology,
            slots: None,
            nodes: Some(nodes),
            max_edges: Some(max_edges),
            ops,
            cost_matrix: None,
            skeleton: None,
        }
    }

    /// Cell space with six edge slots on a four-node DAG and five candidate
    /// ops (15,625 architectures).
    pub fn nas201() -> Self {
        let mut spec = SpaceSpec::op_slot(
            6,
            vec![
                OpType::new("none", OpKind::None),
                OpType::new("identity", OpKind::Identity),
                OpType::new("conv1x1", OpKind::Conv),
                OpType::new("conv3x3", OpKind::Conv),
                OpType::new("avgpool3x3", OpKind::PoolAvg),
            ],
        );
        spec.skeleton = Some(Skeleton {
            nodes: 4,
            edges: vec![[0, 1], [0, 2], [1, 2], [0, 3], [1, 3], [2, 3]],
        });
        spec
    }

    /// Three chained slots over {none, conv1x1, conv3x3}: 27 architectures.
    pub fn toy() -> Self {
        SpaceSpec::op_slot(
            3,
            vec![
                OpType::new("none", OpKind::None),
                OpType::new("conv1x1", OpKind::Conv),
                OpType::new("conv3x3", OpKind::Conv),
            ],
        )
    }

    /// Seven-node topology space with at most nine edges. Far above the
    /// enumeration cap; usable with the bipartite backend only.
    pub fn nas101_like() -> Self {
        SpaceSpec::topology(
            7,
            9,
            vec![
                OpType::new("conv3x3", OpKind::Conv),
                OpType::new("conv1x1", OpKind::Conv),
                OpType::new("maxpool3x3", OpKind::PoolMax),
            ],
        )
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nas201" => Some(Self::nas201()),
            "toy" => Some(Self::toy()),
            "nas101" => Some(Self::nas101_like()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A point of the space. For `op_slot` spaces `ops` holds one op per slot and
/// `edges` is zero; for `topology` spaces `ops` holds the interior node
/// labels and `edges` the upper-triangular adjacency bitset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Architecture {
    ops: Vec<OpId>,
    edges: u32,
}

impl Architecture {
    pub fn op_slot(ops: Vec<OpId>) -> Self {
        Architecture { ops, edges: 0 }
    }

    pub fn topology(edges: u32, labels: Vec<OpId>) -> Self {
        Architecture { ops: labels, edges }
    }

    pub fn ops(&self) -> &[OpId] {
        &self.ops
    }

    pub fn edges(&self) -> u32 {
        self.edges
    }
}

/// A validated space with its resolved cost model.
#[derive(Debug)]
pub struct Space {
    spec: SpaceSpec,
    costs: Vec<Vec<f64>>,
    ins_del: f64,
    unit: f64,
    skeleton: Option<Skeleton>,
    /// Topology only: node pair (i, j), i < j, of each adjacency bit.
    pairs: Vec<(usize, usize)>,
    size: u128,
    masks: OnceLock<Vec<u32>>,
}

impl Space {
    pub fn new(spec: SpaceSpec) -> Result<Self> {
        let c = spec.ops.len();
        if c == 0 {
            return Err(Error::InvalidSpec("op vocabulary is empty".into()));
        }
        if c > 64 {
            return Err(Error::InvalidSpec("at most 64 ops are supported".into()));
        }
        let mut names = HashSet::new();
        for op in &spec.ops {
            if !names.insert(op.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate op name {:?}", op.name)));
            }
        }
        if spec.ops.iter().filter(|o| o.kind == OpKind::None).count() > 1 {
            return Err(Error::InvalidSpec("more than one op of kind none".into()));
        }

        let costs = match &spec.cost_matrix {
            Some(m) => {
                validate_cost_matrix(m, &spec.ops)?;
                m.clone()
            }
            None => (0..c)
                .map(|i| (0..c).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                .collect(),
        };
        let max_w = costs.iter().flatten().fold(0.0f64, |m, &w| m.max(w));
        let ins_del = 5.0 * max_w;
        let unit = if ins_del > 0.0 {
            2f64.powi(ins_del.log2().floor() as i32 - COST_FRACTION_BITS)
        } else {
            2f64.powi(-COST_FRACTION_BITS)
        };

        let mut skeleton = None;
        let mut pairs = Vec::new();
        let size = match spec.family {
            Family::OpSlot => {
                let slots = spec
                    .slots
                    .ok_or_else(|| Error::InvalidSpec("op_slot space needs `slots`".into()))?;
                if slots == 0 || slots > 64 {
                    return Err(Error::InvalidSpec("slots must be in 1..=64".into()));
                }
                let sk = spec.skeleton.clone().unwrap_or_else(|| Skeleton::chain(slots));
                validate_skeleton(&sk, slots)?;
                skeleton = Some(sk);
                let size = (c as u128).checked_pow(slots as u32).unwrap_or(u128::MAX);
                if size > u64::MAX as u128 {
                    return Err(Error::InvalidSpec("encodings do not fit a 64-bit id".into()));
                }
                size
            }
            Family::Topology => {
                let nodes = spec
                    .nodes
                    .ok_or_else(|| Error::InvalidSpec("topology space needs `nodes`".into()))?;
                if !(2..=MAX_TOPOLOGY_NODES).contains(&nodes) {
                    return Err(Error::InvalidSpec(format!(
                        "topology spaces need 2..={MAX_TOPOLOGY_NODES} nodes"
                    )));
                }
                for i in 0..nodes {
                    for j in i + 1..nodes {
                        pairs.push((i, j));
                    }
                }
                let max_edges = spec.max_edges.unwrap_or(pairs.len()).min(pairs.len());
                let edge_sets: u128 = (0..=max_edges).map(|e| binomial(pairs.len(), e)).sum();
                (c as u128).pow((nodes - 2) as u32) * edge_sets
            }
        };
        let has_edits = c > 1 || spec.family == Family::Topology;
        if has_edits && ins_del <= 0.0 {
            return Err(Error::InvalidSpec("cost matrix needs a positive entry".into()));
        }

        Ok(Space { spec, costs, ins_del, unit, skeleton, pairs, size, masks: OnceLock::new() })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    /// Number of architectures N.
    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn num_ops(&self) -> usize {
        self.spec.ops.len()
    }

    pub fn op(&self, id: OpId) -> &OpType {
        &self.spec.ops[id as usize]
    }

    pub fn op_kind(&self, id: OpId) -> OpKind {
        self.spec.ops[id as usize].kind
    }

    pub fn op_id(&self, name: &str) -> Option<OpId> {
        self.spec.ops.iter().position(|o| o.name == name).map(|i| i as OpId)
    }

    pub fn none_op(&self) -> Option<OpId> {
        self.spec.ops.iter().position(|o| o.kind == OpKind::None).map(|i| i as OpId)
    }

    /// Number of op positions: slots, or interior nodes.
    pub fn positions(&self) -> usize {
        match self.spec.family {
            Family::OpSlot => self.spec.slots.unwrap_or(0),
            Family::Topology => self.spec.nodes.unwrap_or(2) - 2,
        }
    }

    pub fn max_edges(&self) -> usize {
        self.spec.max_edges.unwrap_or(self.pairs.len()).min(self.pairs.len())
    }

    /// Node pairs indexed by adjacency bit (topology spaces).
    pub fn edge_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn skeleton(&self) -> Option<&Skeleton> {
        self.skeleton.as_ref()
    }

    pub fn cost_matrix(&self) -> &[Vec<f64>] {
        &self.costs
    }

    /// Cost of inserting or deleting a layer or an edge: 5 × the largest
    /// substitution cost.
    pub fn insertion_deletion_cost(&self) -> f64 {
        self.ins_del
    }

    /// Cost of replacing op `from` with op `to`. Swapping to or from the
    /// `none` op is a deletion or insertion.
    pub fn edit_cost(&self, from: OpId, to: OpId) -> f64 {
        if from == to {
            0.0
        } else if self.op_kind(from) == OpKind::None || self.op_kind(to) == OpKind::None {
            self.ins_del
        } else {
            self.costs[from as usize][to as usize]
        }
    }

    /// Resolution of quantized costs. Always a power of two no larger than
    /// 2⁻²⁰ of the largest edit cost.
    pub fn cost_unit(&self) -> f64 {
        self.unit
    }

    pub fn quantize(&self, cost: f64) -> u64 {
        (cost / self.unit).round() as u64
    }

    pub fn dequantize(&self, units: u64) -> f64 {
        units as f64 * self.unit
    }

    pub fn edit_units(&self, from: OpId, to: OpId) -> u64 {
        self.quantize(self.edit_cost(from, to))
    }

    pub fn ins_del_units(&self) -> u64 {
        self.quantize(self.ins_del)
    }

    /// Canonical 64-bit key. Mixed radix over op ids with position 0 least
    /// significant; topology spaces put the adjacency bits above the labels.
    pub fn arch_id(&self, arch: &Architecture) -> u64 {
        let c = self.num_ops() as u64;
        let mut id = 0u64;
        for &op in arch.ops.iter().rev() {
            id = id.wrapping_mul(c).wrapping_add(op as u64);
        }
        match self.spec.family {
            Family::OpSlot => id,
            Family::Topology => {
                let radix = c.wrapping_pow(self.positions() as u32);
                (arch.edges as u64).wrapping_mul(radix).wrapping_add(id)
            }
        }
    }

    pub fn decode(&self, arch_id: u64) -> Result<Architecture> {
        let c = self.num_ops() as u64;
        let positions = self.positions();
        let (mut rest, edges) = match self.spec.family {
            Family::OpSlot => (arch_id, 0u32),
            Family::Topology => {
                let radix = c.pow(positions as u32);
                let edges = arch_id / radix;
                if edges >> self.pairs.len() != 0 {
                    return Err(Error::NotInSpace(arch_id));
                }
                (arch_id % radix, edges as u32)
            }
        };
        let mut ops = Vec::with_capacity(positions);
        for _ in 0..positions {
            ops.push((rest % c) as OpId);
            rest /= c;
        }
        if rest != 0 {
            return Err(Error::NotInSpace(arch_id));
        }
        let arch = Architecture { ops, edges };
        if !self.contains(&arch) {
            return Err(Error::NotInSpace(arch_id));
        }
        Ok(arch)
    }

    pub fn contains(&self, arch: &Architecture) -> bool {
        if arch.ops.len() != self.positions()
            || arch.ops.iter().any(|&o| o as usize >= self.num_ops())
        {
            return false;
        }
        match self.spec.family {
            Family::OpSlot => arch.edges == 0,
            Family::Topology => {
                arch.edges >> self.pairs.len() == 0
                    && arch.edges.count_ones() as usize <= self.max_edges()
            }
        }
    }

    fn admissible_masks(&self) -> &[u32] {
        self.masks.get_or_init(|| {
            let max = self.max_edges() as u32;
            (0..1u64 << self.pairs.len())
                .map(|m| m as u32)
                .filter(|m| m.count_ones() <= max)
                .collect()
        })
    }

    fn check_cap(&self, cap: u64) -> Result<()> {
        if self.size > cap as u128 {
            return Err(Error::SpaceTooLarge { size: self.size, cap });
        }
        Ok(())
    }

    /// The `index`-th architecture in enumeration order (ascending arch id).
    pub fn nth(&self, index: u64) -> Result<Architecture> {
        if index as u128 >= self.size {
            return Err(Error::InvalidArgument(format!("index {index} out of range")));
        }
        match self.spec.family {
            Family::OpSlot => self.decode(index),
            Family::Topology => {
                self.check_cap(DEFAULT_SPACE_CAP)?;
                let radix = (self.num_ops() as u64).pow(self.positions() as u32);
                let mask = self.admissible_masks()[(index / radix) as usize];
                let labels = self.decode_labels(index % radix);
                Ok(Architecture { ops: labels, edges: mask })
            }
        }
    }

    fn decode_labels(&self, mut rest: u64) -> Vec<OpId> {
        let c = self.num_ops() as u64;
        (0..self.positions())
            .map(|_| {
                let op = (rest % c) as OpId;
                rest /= c;
                op
            })
            .collect()
    }

    /// Uniform draw from the space.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Architecture {
        let c = self.num_ops() as OpId;
        let ops = (0..self.positions()).map(|_| rng.gen_range(0..c)).collect();
        let edges = match self.spec.family {
            Family::OpSlot => 0,
            Family::Topology => loop {
                let mask = rng.gen::<u32>() & low_bits(self.pairs.len());
                if mask.count_ones() as usize <= self.max_edges() {
                    break mask;
                }
            },
        };
        Architecture { ops, edges }
    }

    /// Every architecture exactly once, by ascending arch id.
    pub fn enumerate(&self, limit: Option<usize>) -> Result<impl Iterator<Item = Architecture> + '_> {
        self.enumerate_with_cap(limit, DEFAULT_SPACE_CAP)
    }

    pub fn enumerate_with_cap(
        &self,
        limit: Option<usize>,
        cap: u64,
    ) -> Result<impl Iterator<Item = Architecture> + '_> {
        if limit.is_none() {
            self.check_cap(cap)?;
        }
        let total = u64::try_from(self.size).unwrap_or(u64::MAX);
        let take = limit.map_or(total, |l| total.min(l as u64));
        let topology_radix = match self.spec.family {
            Family::OpSlot => 0,
            Family::Topology => (self.num_ops() as u64).pow(self.positions() as u32),
        };
        Ok((0..take).map(move |i| match self.spec.family {
            Family::OpSlot => Architecture { ops: self.decode_labels(i), edges: 0 },
            Family::Topology => {
                // Walk masks in order without materializing them all.
                let mask = nth_mask(self.pairs.len(), self.max_edges(), i / topology_radix);
                Architecture { ops: self.decode_labels(i % topology_radix), edges: mask }
            }
        }))
    }

    /// All architectures one edit away, with the cost of that edit.
    /// Deduplicated and never containing `arch` itself.
    pub fn neighbors(&self, arch: &Architecture) -> Vec<(Architecture, f64)> {
        let mut out = Vec::with_capacity(self.degree_hint());
        self.for_each_neighbor(arch, |n, from, to| {
            let cost = match (from, to) {
                (Some(f), Some(t)) => self.edit_cost(f, t),
                _ => self.ins_del,
            };
            out.push((n, cost));
        });
        out
    }

    fn degree_hint(&self) -> usize {
        self.positions() * self.num_ops().saturating_sub(1) + self.pairs.len()
    }

    /// Calls `f(neighbor, old_op, new_op)` per edit; the ops are `None` for
    /// edge toggles.
    pub(crate) fn for_each_neighbor(
        &self,
        arch: &Architecture,
        mut f: impl FnMut(Architecture, Option<OpId>, Option<OpId>),
    ) {
        let c = self.num_ops() as OpId;
        for pos in 0..arch.ops.len() {
            let old = arch.ops[pos];
            for new in 0..c {
                if new != old {
                    let mut ops = arch.ops.clone();
                    ops[pos] = new;
                    f(Architecture { ops, edges: arch.edges }, Some(old), Some(new));
                }
            }
        }
        if self.spec.family == Family::Topology {
            let count = arch.edges.count_ones() as usize;
            for bit in 0..self.pairs.len() {
                let set = arch.edges & (1 << bit) != 0;
                if set || count < self.max_edges() {
                    let edges = arch.edges ^ (1 << bit);
                    f(Architecture { ops: arch.ops.clone(), edges }, None, None);
                }
            }
        }
    }

    /// Quantized costs of the neighbors of `arch`, as (arch id, units).
    pub(crate) fn neighbor_units(&self, arch: &Architecture) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(self.degree_hint());
        self.for_each_neighbor(arch, |n, from, to| {
            let units = match (from, to) {
                (Some(f), Some(t)) => self.edit_units(f, t),
                _ => self.ins_del_units(),
            };
            out.push((self.arch_id(&n), units));
        });
        out
    }

    /// Simple input→output paths after pruning `none` ops, each as the op
    /// ids met along it. Empty when pruning disconnects the output.
    pub fn paths(&self, arch: &Architecture) -> Vec<Vec<OpId>> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        match self.spec.family {
            Family::OpSlot => {
                let sk = self.skeleton.as_ref().expect("op_slot space has a skeleton");
                let mut adj = vec![Vec::new(); sk.nodes];
                for (slot, &[u, v]) in sk.edges.iter().enumerate() {
                    let op = arch.ops[slot];
                    if self.op_kind(op) != OpKind::None {
                        adj[u].push((v, op));
                    }
                }
                slot_paths(&adj, 0, sk.nodes - 1, &mut stack, &mut out);
            }
            Family::Topology => {
                let nodes = self.spec.nodes.unwrap_or(2);
                let alive = |n: usize| {
                    n == 0 || n == nodes - 1 || self.op_kind(arch.ops[n - 1]) != OpKind::None
                };
                let mut adj = vec![Vec::new(); nodes];
                for (bit, &(i, j)) in self.pairs.iter().enumerate() {
                    if arch.edges & (1 << bit) != 0 && alive(i) && alive(j) {
                        adj[i].push(j);
                    }
                }
                node_paths(&adj, &arch.ops, 0, nodes - 1, &mut stack, &mut out);
            }
        }
        out
    }

    /// Number of skip connections: identity-kind slots in `op_slot` spaces,
    /// edges spanning more than one node index in `topology` spaces.
    pub fn skip_connections(&self, arch: &Architecture) -> usize {
        match self.spec.family {
            Family::OpSlot => {
                arch.ops.iter().filter(|&&o| self.op_kind(o) == OpKind::Identity).count()
            }
            Family::Topology => self
                .pairs
                .iter()
                .enumerate()
                .filter(|&(bit, &(i, j))| arch.edges & (1 << bit) != 0 && j > i + 1)
                .count(),
        }
    }

    pub fn count_kind(&self, arch: &Architecture, kind: OpKind) -> usize {
        arch.ops.iter().filter(|&&o| self.op_kind(o) == kind).count()
    }

    /// Ops that are not `none`, paired with their position.
    pub fn layers(&self, arch: &Architecture) -> Vec<(usize, OpId)> {
        arch.ops
            .iter()
            .enumerate()
            .filter(|&(_, &o)| self.op_kind(o) != OpKind::None)
            .map(|(p, &o)| (p, o))
            .collect()
    }

    /// Stable hash of the spec (first 8 bytes of SHA-256 over its JSON form).
    pub fn spec_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(&self.spec).expect("spec serializes");
        digest_u64(&bytes)
    }

    /// Stable hash of the resolved cost matrix.
    pub fn cost_hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for w in self.costs.iter().flatten() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        digest_u64(&bytes)
    }
}

pub(crate) fn digest_u64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn slot_paths(
    adj: &[Vec<(usize, OpId)>],
    at: usize,
    target: usize,
    stack: &mut Vec<OpId>,
    out: &mut Vec<Vec<OpId>>,
) {
    if at == target {
        out.push(stack.clone());
        return;
    }
    for &(next, op) in &adj[at] {
        stack.push(op);
        slot_paths(adj, next, target, stack, out);
        stack.pop();
    }
}

fn node_paths(
    adj: &[Vec<usize>],
    labels: &[OpId],
    at: usize,
    target: usize,
    stack: &mut Vec<OpId>,
    out: &mut Vec<Vec<OpId>>,
) {
    if at == target {
        out.push(stack.clone());
        return;
    }
    for &next in &adj[at] {
        let interior = next != target;
        if interior {
            stack.push(labels[next - 1]);
        }
        node_paths(adj, labels, next, target, stack, out);
        if interior {
            stack.pop();
        }
    }
}

fn validate_cost_matrix(m: &[Vec<f64>], ops: &[OpType]) -> Result<()> {
    let c = ops.len();
    if m.len() != c || m.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidSpec(format!("cost matrix must be {c}x{c}")));
    }
    for i in 0..c {
        if m[i][i] != 0.0 {
            return Err(Error::InvalidSpec("cost matrix diagonal must be zero".into()));
        }
        for j in 0..c {
            let w = m[i][j];
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSpec(format!("cost [{i}][{j}] = {w} is invalid")));
            }
            if w != m[j][i] {
                return Err(Error::InvalidSpec("cost matrix must be symmetric".into()));
            }
            let real = ops[i].kind != OpKind::None && ops[j].kind != OpKind::None;
            if i != j && real && w == 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "substitution {} -> {} must have positive cost",
                    ops[i].name, ops[j].name
                )));
            }
        }
    }
    Ok(())
}

fn validate_skeleton(sk: &Skeleton, slots: usize) -> Result<()> {
    if sk.edges.len() != slots {
        return Err(Error::InvalidSpec(format!(
            "skeleton has {} edges for {} slots",
            sk.edges.len(),
            slots
        )));
    }
    if sk.nodes < 2 {
        return Err(Error::InvalidSpec("skeleton needs an input and an output node".into()));
    }
    for &[u, v] in &sk.edges {
        if u >= v || v >= sk.nodes {
            return Err(Error::InvalidSpec(format!("skeleton edge [{u}, {v}] is not forward")));
        }
    }
    Ok(())
}

fn low_bits(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The `rank`-th mask (ascending numeric order) over `bits` bits with at
/// most `max` ones.
fn nth_mask(bits: usize, max: usize, mut rank: u64) -> u32 {
    // Count of masks below a prefix: decide bits from the top down.
    let mut mask = 0u32;
    let mut ones = 0usize;
    for bit in (0..bits).rev() {
        // masks with this bit clear and any lower bits
        let below: u128 = (0..=max.saturating_sub(ones)).map(|e| binomial(bit, e)).sum();
        if (rank as u128) < below {
            continue;
        }
        rank -= below as u64;
        mask |= 1 << bit;
        ones += 1;
    }
    mask
}
