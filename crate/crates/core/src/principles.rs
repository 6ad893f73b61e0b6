//! Structural design principles as predicates over architectures, and a
//! rank test for whether passing a principle goes with higher accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::space::{Architecture, OpId, OpKind, Space};

pub const PRINCIPLE_IDS: [&str; 8] = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8"];

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Filter,
    ScoreOnly,
}

/// One principle with its mode and thresholds. Recognized params: `t1`
/// (minimum skip connections for P1), `t3` (maximum max-pool ops for P3).
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Principle {
    pub id: String,
    pub mode: Mode,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Principle {
    /// P1 is score-only by default; the rest filter.
    pub fn standard(id: &str) -> Result<Self> {
        if !PRINCIPLE_IDS.contains(&id) {
            return Err(Error::InvalidArgument(format!("unknown principle {id:?}")));
        }
        let mode = if id == "P1" { Mode::ScoreOnly } else { Mode::Filter };
        Ok(Principle { id: id.to_string(), mode, params: BTreeMap::new() })
    }

    pub fn all() -> Vec<Self> {
        PRINCIPLE_IDS.iter().map(|id| Principle::standard(id).expect("known id")).collect()
    }

    fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }

    pub fn holds(&self, space: &Space, arch: &Architecture) -> bool {
        self.check(&Analysis::new(space, arch))
    }

    fn check(&self, a: &Analysis) -> bool {
        match self.id.as_str() {
            "P1" => a.skips as f64 >= self.param("t1", 0.0),
            "P2" => a.paths.iter().all(|p| {
                p.iter().rev().find(|k| **k != OpKind::Identity).is_none_or(|k| !k.is_pool())
            }),
            "P3" => a.max_pools as f64 <= self.param("t3", 1.0),
            "P4" => a.paths.iter().any(|p| p.iter().all(|k| *k == OpKind::Identity)),
            "P5" => a.avg_pools == 0,
            "P6" => a.conv3x3.iter().any(|&c| c >= 2),
            "P7" => a.conv3x3.iter().filter(|&&c| c >= 1).count() >= 2,
            "P8" => a.paths.iter().filter(|p| !p.contains(&OpKind::Conv)).count() <= 1,
            _ => unreachable!("ids are validated on construction"),
        }
    }
}

/// Parses a principle config: a JSON array of `{id, mode, params}`.
pub fn load_principles(text: &str) -> Result<Vec<Principle>> {
    let set: Vec<Principle> = serde_json::from_str(text)?;
    for p in &set {
        if !PRINCIPLE_IDS.contains(&p.id.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown principle {:?}", p.id)));
        }
        for key in p.params.keys() {
            if key != "t1" && key != "t3" {
                return Err(Error::InvalidArgument(format!("unknown param {key:?} for {}", p.id)));
            }
        }
    }
    Ok(set)
}

/// Whether an op counts as a 3×3 convolution.
pub fn is_conv3x3(space: &Space, op: OpId) -> bool {
    let t = space.op(op);
    t.kind == OpKind::Conv && t.name.contains("3x3")
}

/// Path structure of one architecture, computed once for all principles.
pub(crate) struct Analysis {
    pub paths: Vec<Vec<OpKind>>,
    /// conv3×3 count along each path.
    pub conv3x3: Vec<usize>,
    pub skips: usize,
    pub max_pools: usize,
    pub avg_pools: usize,
}

impl Analysis {
    pub fn new(space: &Space, arch: &Architecture) -> Self {
        let raw = space.paths(arch);
        Analysis {
            conv3x3: raw.iter().map(|p| p.iter().filter(|&&o| is_conv3x3(space, o)).count()).collect(),
            paths: raw.iter().map(|p| p.iter().map(|&o| space.op_kind(o)).collect()).collect(),
            skips: space.skip_connections(arch),
            max_pools: space.count_kind(arch, OpKind::PoolMax),
            avg_pools: space.count_kind(arch, OpKind::PoolAvg),
        }
    }
}

/// Pass/fail per principle id.
pub fn evaluate_principles(space: &Space, arch: &Architecture, set: &[Principle]) -> BTreeMap<String, bool> {
    let a = Analysis::new(space, arch);
    set.iter().map(|p| (p.id.clone(), p.check(&a))).collect()
}

/// Whether every filter-mode principle in `set` holds.
pub fn passes_filters(space: &Space, arch: &Architecture, set: &[Principle]) -> bool {
    if set.iter().all(|p| p.mode != Mode::Filter) {
        return true;
    }
    let a = Analysis::new(space, arch);
    set.iter().filter(|p| p.mode == Mode::Filter).all(|p| p.check(&a))
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Significance {
    /// One-sided: small when the pass group is more accurate.
    pub p_value: f64,
    /// +1 when the pass group's mean is higher, -1 when lower, 0 if equal.
    pub effect_direction: i8,
    pub pass_mean: f64,
    pub fail_mean: f64,
    pub n_pass: usize,
    pub n_fail: usize,
    pub u: f64,
    pub z: f64,
}

/// One-sided Mann–Whitney U test of `pass` against `fail`, normal
/// approximation with tie correction and no continuity correction.
pub fn principle_significance(pass: &[f64], fail: &[f64]) -> Result<Significance> {
    if pass.is_empty() || fail.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (n1, n2) = (pass.len() as f64, fail.len() as f64);
    let mut all: Vec<(f64, bool)> =
        pass.iter().map(|&x| (x, true)).chain(fail.iter().map(|&x| (x, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut rank_sum = 0.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * all[i..=j].iter().filter(|x| x.1).count() as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    let nf = n as f64;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)).max(1.0));
    let z = if var > 0.0 { (u - n1 * n2 / 2.0) / var.sqrt() } else { 0.0 };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = normal.cdf(-z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let pass_mean = pass.iter().sum::<f64>() / n1;
    let fail_mean = fail.iter().sum::<f64>() / n2;
    let effect_direction = match pass_mean.total_cmp(&fail_mean) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    };
    Ok(Significance {
        p_value: p,
        effect_direction,
        pass_mean,
        fail_mean,
        n_pass: pass.len(),
        n_fail: fail.len(),
        u,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceSpec;

    fn nas201() -> Space {
        Space::new(SpaceSpec::nas201()).unwrap()
    }

    // slots: 0→1, 0→2, 1→2, 0→3, 1→3, 2→3; ops: none, identity, conv1x1, conv3x3, avgpool
    #[test]
    fn identity_shortcut_and_two_conv_paths() {
        let space = nas201();
        let a = Architecture::op_slot(vec![3, 3, 0, 1, 3, 3]);
        let r = evaluate_principles(&space, &a, &Principle::all());
        for id in ["P2", "P3", "P4", "P5", "P6", "P7", "P8"] {
            assert!(r[id], "{id}");
        }
    }

    #[test]
    fn all_identity_cell() {
        let space = nas201();
        let a = Architecture::op_slot(vec![1; 6]);
        let r = evaluate_principles(&space, &a, &Principle::all());
        assert!(r["P4"]);
        assert!(!r["P6"] && !r["P7"] && !r["P8"]);
    }

    #[test]
    fn pool_at_the_end() {
        let space = nas201();
        // 0→3 avgpool: the last op on that path is a pool
        let a = Architecture::op_slot(vec![0, 0, 0, 4, 0, 0]);
        let p2 = Principle::standard("P2").unwrap();
        assert!(!p2.holds(&space, &a));
        // conv after the pool
        let b = Architecture::op_slot(vec![4, 0, 0, 0, 3, 0]);
        assert!(p2.holds(&space, &b));
    }

    #[test]
    fn config_parsing() {
        let set = load_principles(r#"[{"id":"P1","mode":"filter","params":{"t1":2}},{"id":"P5","mode":"score_only"}]"#)
            .unwrap();
        assert_eq!(set[0].param("t1", 0.0), 2.0);
        assert_eq!(set[1].mode, Mode::ScoreOnly);
        assert!(load_principles(r#"[{"id":"P9","mode":"filter"}]"#).is_err());
    }

    #[test]
    fn identical_groups_give_half() {
        let g = [0.1, 0.2, 0.3, 0.4];
        let s = principle_significance(&g, &g).unwrap();
        assert!((s.p_value - 0.5).abs() < 1e-12);
        assert_eq!(s.effect_direction, 0);
    }

    #[test]
    fn empty_group() {
        assert!(matches!(principle_significance(&[], &[1.0]), Err(Error::EmptyGroup)));
    }
}
