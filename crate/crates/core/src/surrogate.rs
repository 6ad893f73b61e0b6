//! Deterministic synthetic accuracy over structural features, standing in
//! for trained-network accuracy in search experiments.

use serde::{Deserialize, Serialize};

use crate::principles::is_conv3x3;
use crate::space::{Architecture, OpKind, Space};

/// Logit-space weights. Op weights apply per occurrence in the encoding.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SurrogateWeights {
    pub base: f64,
    pub conv3x3: f64,
    pub conv_other: f64,
    pub identity: f64,
    pub avg_pool: f64,
    pub max_pool: f64,
    pub other: f64,
    /// Some input→output path made of identity ops only.
    pub identity_path: f64,
    /// Most conv3×3 ops on a single path.
    pub conv3x3_stack: f64,
    /// Paths with at least one conv3×3.
    pub conv3x3_paths: f64,
    /// Paths without any convolution.
    pub conv_free_paths: f64,
}

impl Default for SurrogateWeights {
    fn default() -> Self {
        SurrogateWeights {
            base: 1.0,
            conv3x3: 0.15,
            conv_other: 0.08,
            identity: 0.02,
            avg_pool: -0.8,
            max_pool: -0.3,
            other: 0.0,
            identity_path: 0.4,
            conv3x3_stack: 0.2,
            conv3x3_paths: 0.1,
            conv_free_paths: -0.25,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    pub seed: u64,
    pub weights: SurrogateWeights,
    /// Standard deviation of the uniform logit noise.
    pub sigma: f64,
}

impl SurrogateModel {
    pub fn new(seed: u64) -> Self {
        SurrogateModel { seed, weights: SurrogateWeights::default(), sigma: 0.01 }
    }

    /// Logit before noise.
    pub fn logit(&self, space: &Space, arch: &Architecture) -> f64 {
        let w = &self.weights;
        let mut z = w.base;
        for &op in arch.ops() {
            z += match space.op_kind(op) {
                OpKind::Conv if is_conv3x3(space, op) => w.conv3x3,
                OpKind::Conv => w.conv_other,
                OpKind::Identity => w.identity,
                OpKind::PoolAvg => w.avg_pool,
                OpKind::PoolMax => w.max_pool,
                OpKind::Other => w.other,
                OpKind::None => 0.0,
            };
        }
        let paths = space.paths(arch);
        let mut stack = 0usize;
        let mut conv_paths = 0usize;
        let mut conv_free = 0usize;
        let mut identity_path = false;
        for p in &paths {
            let c3 = p.iter().filter(|&&o| is_conv3x3(space, o)).count();
            stack = stack.max(c3);
            conv_paths += (c3 > 0) as usize;
            conv_free += p.iter().all(|&o| space.op_kind(o) != OpKind::Conv) as usize;
            identity_path |= p.iter().all(|&o| space.op_kind(o) == OpKind::Identity);
        }
        if identity_path {
            z += w.identity_path;
        }
        z + w.conv3x3_stack * stack as f64
            + w.conv3x3_paths * conv_paths as f64
            + w.conv_free_paths * conv_free as f64
    }

    /// Noise in [-σ√3, σ√3), fixed per (seed, architecture).
    pub fn noise(&self, space: &Space, arch: &Architecture) -> f64 {
        let h = splitmix64(self.seed ^ splitmix64(space.arch_id(arch)));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        (2.0 * u - 1.0) * self.sigma * 3f64.sqrt()
    }

    pub fn score(&self, space: &Space, arch: &Architecture) -> f64 {
        let z = self.logit(space, arch) + self.noise(space, arch);
        1.0 / (1.0 + libm::exp(-z))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
