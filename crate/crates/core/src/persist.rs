//! On-disk artifacts: the binary distance cache and JSON exports of the
//! cluster tree and layouts. Writers hold an exclusive advisory lock on
//! the target file, readers a shared one.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::cluster::{ClusterNode, ClusterTree, KScore, NodeStats};
use crate::distance::{Backend, DistanceMatrix};
use crate::error::{Error, Result};
use crate::layout::LayoutResult;
use crate::space::{digest_u64, Space};

pub const MAGIC: &[u8; 4] = b"AXDM";
pub const CACHE_VERSION: u16 = 1;
pub const TREE_VERSION: u32 = 1;
/// Fixed-point scale used unless the largest distance would overflow u32.
pub const DEFAULT_SCALE: u32 = 1 << 20;

const HEADER_LEN: usize = 4 + 2 + 4 + 1 + 4 + 3 * 8;

/// What a cached artifact was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheKey {
    pub space_hash: u64,
    pub cost_hash: u64,
    pub sample_hash: u64,
}

impl CacheKey {
    pub fn new(space: &Space, sample: &[u64]) -> Self {
        CacheKey { space_hash: space.spec_hash(), cost_hash: space.cost_hash(), sample_hash: sample_hash(sample) }
    }

    fn check(&self, expected: &CacheKey) -> Result<()> {
        let mut stale = Vec::new();
        if self.space_hash != expected.space_hash {
            stale.push("space");
        }
        if self.cost_hash != expected.cost_hash {
            stale.push("cost matrix");
        }
        if self.sample_hash != expected.sample_hash {
            stale.push("sample set");
        }
        if stale.is_empty() {
            Ok(())
        } else {
            Err(Error::StaleCache(format!("{} changed", stale.join(", "))))
        }
    }
}

/// Order-sensitive hash of the sampled ids.
pub fn sample_hash(ids: &[u64]) -> u64 {
    let bytes: Vec<u8> = ids.iter().flat_map(|id| id.to_le_bytes()).collect();
    digest_u64(&bytes)
}

/// Largest power-of-two scale up to 2^20 that keeps `max · scale` in u32.
fn scale_for(max: f64) -> u32 {
    let mut scale = DEFAULT_SCALE;
    while scale > 1 && (max * scale as f64).round() > u32::MAX as f64 {
        scale /= 2;
    }
    scale
}

/// Layout: magic, version u16, n u32, backend u8, scale u32, then space,
/// cost and sample hashes (u64 each), n arch ids (u64), and the strict
/// upper triangle row-major as u32 `round(d · scale)`. Little-endian.
pub fn encode_distances(dm: &DistanceMatrix, key: &CacheKey) -> Result<Vec<u8>> {
    let n = dm.len();
    let max = dm.max();
    if !max.is_finite() || max > u32::MAX as f64 {
        return Err(Error::InvalidArgument(format!("distance {max} does not fit the cache format")));
    }
    let scale = scale_for(max);
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n + 2 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(dm.backend().tag());
    out.extend_from_slice(&scale.to_le_bytes());
    for h in [key.space_hash, key.cost_hash, key.sample_hash] {
        out.extend_from_slice(&h.to_le_bytes());
    }
    for id in dm.ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = (dm.get(i, j) * scale as f64).round() as u32;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Inverse of [`encode_distances`]. With `expected`, a key mismatch is
/// [`Error::StaleCache`].
pub fn decode_distances(bytes: &[u8], expected: Option<&CacheKey>) -> Result<(DistanceMatrix, CacheKey)> {
    let corrupt = |msg: &str| Error::CorruptFile(msg.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().expect("2 bytes"));
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != CACHE_VERSION {
        return Err(Error::CorruptFile(format!("unsupported version {version}")));
    }
    let n = u32_at(6) as usize;
    let backend = Backend::from_tag(bytes[10]).ok_or_else(|| corrupt("bad backend tag"))?;
    let scale = u32_at(11);
    if scale == 0 {
        return Err(corrupt("zero scale"));
    }
    let key = CacheKey { space_hash: u64_at(15), cost_hash: u64_at(23), sample_hash: u64_at(31) };
    let expected_len = (n as u128) * 8 + (n as u128) * (n.saturating_sub(1) as u128) / 2 * 4;
    if (bytes.len() - HEADER_LEN) as u128 != expected_len {
        return Err(Error::CorruptFile(format!("size does not match n = {n}")));
    }
    let ids: Vec<u64> = (0..n).map(|i| u64_at(HEADER_LEN + 8 * i)).collect();
    if sample_hash(&ids) != key.sample_hash {
        return Err(corrupt("sample hash does not match stored ids"));
    }
    if let Some(exp) = expected {
        key.check(exp)?;
    }
    let mut values = vec![0.0; n * n];
    let mut o = HEADER_LEN + 8 * n;
    for i in 0..n {
        for j in i + 1..n {
            let d = u32_at(o) as f64 / scale as f64;
            values[i * n + j] = d;
            values[j * n + i] = d;
            o += 4;
        }
    }
    Ok((DistanceMatrix::new(ids, values, backend)?, key))
}

pub fn save_distances(path: &Path, dm: &DistanceMatrix, key: &CacheKey) -> Result<()> {
    write_locked(path, &encode_distances(dm, key)?)
}

pub fn load_distances(path: &Path, expected: Option<&CacheKey>) -> Result<(DistanceMatrix, CacheKey)> {
    decode_distances(&read_locked(path)?, expected)
}

fn write_locked(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = OpenOptions::new().write(true).create(true).truncate(false).open(path)?;
    f.lock()?;
    f.set_len(0)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    f.unlock()?;
    Ok(())
}

fn read_locked(path: &Path) -> Result<Vec<u8>> {
    let mut f = File::open(path)?;
    f.lock_shared()?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    f.unlock()?;
    Ok(bytes)
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TreeFile {
    pub version: u32,
    pub space_hash: String,
    pub sample_hash: String,
    pub root: TreeNodeOut,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TreeNodeOut {
    pub id: usize,
    pub level: usize,
    pub medoid_arch_id: u64,
    pub member_count: usize,
    pub members: Vec<u64>,
    pub representatives: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_curve: Vec<KScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<NodeStats>,
    pub children: Vec<TreeNodeOut>,
}

pub fn tree_to_file(tree: &ClusterTree, dm: &DistanceMatrix, space_hash: u64) -> TreeFile {
    fn node(tree: &ClusterTree, dm: &DistanceMatrix, id: usize) -> TreeNodeOut {
        let n = &tree.nodes[id];
        let ids = dm.ids();
        TreeNodeOut {
            id,
            level: n.level,
            medoid_arch_id: ids[n.medoid],
            member_count: n.members.len(),
            members: n.members.iter().map(|&m| ids[m]).collect(),
            representatives: n.representatives.iter().map(|&m| ids[m]).collect(),
            k_curve: n.k_curve.clone(),
            stats: n.stats.clone(),
            children: n.children.iter().map(|&c| node(tree, dm, c)).collect(),
        }
    }
    TreeFile {
        version: TREE_VERSION,
        space_hash: format!("{space_hash:016x}"),
        sample_hash: format!("{:016x}", sample_hash(dm.ids())),
        root: node(tree, dm, 0),
    }
}

/// Rebuilds the tree against the matrix it was computed from.
pub fn tree_from_file(file: &TreeFile, dm: &DistanceMatrix) -> Result<ClusterTree> {
    if file.version != TREE_VERSION {
        return Err(Error::CorruptFile(format!("unsupported tree version {}", file.version)));
    }
    if file.sample_hash != format!("{:016x}", sample_hash(dm.ids())) {
        return Err(Error::StaleCache("tree was built over a different sample set".into()));
    }
    let index: std::collections::HashMap<u64, usize> =
        dm.ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let lookup = |id: u64| index.get(&id).copied().ok_or_else(|| Error::CorruptFile(format!("unknown arch {id}")));
    let mut nodes: Vec<Option<ClusterNode>> = Vec::new();
    let mut stack = vec![(&file.root, None::<usize>)];
    while let Some((n, parent)) = stack.pop() {
        if nodes.len() <= n.id {
            nodes.resize(n.id + 1, None);
        }
        if nodes[n.id].is_some() {
            return Err(Error::CorruptFile(format!("duplicate node id {}", n.id)));
        }
        nodes[n.id] = Some(ClusterNode {
            id: n.id,
            level: n.level,
            parent,
            members: n.members.iter().map(|&a| lookup(a)).collect::<Result<_>>()?,
            medoid: lookup(n.medoid_arch_id)?,
            children: n.children.iter().map(|c| c.id).collect(),
            representatives: n.representatives.iter().map(|&a| lookup(a)).collect::<Result<_>>()?,
            k_curve: n.k_curve.clone(),
            stats: n.stats.clone(),
        });
        for c in n.children.iter().rev() {
            stack.push((c, Some(n.id)));
        }
    }
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.ok_or_else(|| Error::CorruptFile(format!("missing node {i}"))))
        .collect::<Result<Vec<_>>>()?;
    if nodes.first().is_none_or(|r| r.id != 0 || r.parent.is_some()) {
        return Err(Error::CorruptFile("root must be node 0".into()));
    }
    Ok(ClusterTree { nodes })
}

fn check_space(found: &str, expected: Option<u64>) -> Result<()> {
    match expected {
        Some(h) if found != format!("{h:016x}") => {
            Err(Error::StaleCache(format!("computed for space {found}, expected {h:016x}")))
        }
        _ => Ok(()),
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_locked(path, text.as_bytes())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_locked(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::CorruptFile(e.to_string()))
}

pub fn save_tree(path: &Path, tree: &ClusterTree, dm: &DistanceMatrix, space_hash: u64) -> Result<()> {
    save_json(path, &tree_to_file(tree, dm, space_hash))
}

pub fn load_tree(path: &Path, dm: &DistanceMatrix, space_hash: Option<u64>) -> Result<(ClusterTree, u64)> {
    let file: TreeFile = load_json(path)?;
    check_space(&file.space_hash, space_hash)?;
    let hash = u64::from_str_radix(&file.space_hash, 16).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok((tree_from_file(&file, dm)?, hash))
}

/// Layouts for successive navigation levels.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct LayoutFile {
    pub version: u32,
    pub space_hash: String,
    pub levels: Vec<LayoutResult>,
}

pub fn save_layouts(path: &Path, levels: &[LayoutResult], space_hash: u64) -> Result<()> {
    save_json(
        path,
        &LayoutFile {
            version: crate::layout::LAYOUT_VERSION,
            space_hash: format!("{space_hash:016x}"),
            levels: levels.to_vec(),
        },
    )
}

pub fn load_layouts(path: &Path, space_hash: Option<u64>) -> Result<Vec<LayoutResult>> {
    let file: LayoutFile = load_json(path)?;
    check_space(&file.space_hash, space_hash)?;
    Ok(file.levels)
}
