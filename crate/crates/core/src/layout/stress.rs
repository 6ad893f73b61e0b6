//! Cluster-center placement by weighted stress minimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_STRESS_ITERATIONS: usize = 500;

#[derive(Clone, Debug)]
pub struct StressLayout {
    pub positions: Vec<[f64; 2]>,
    /// Stress after each accepted step, starting with the initial layout.
    pub trace: Vec<f64>,
}

/// Σ_{i<j} (|p_i − p_j| − d_ij)² / d_ij², skipping pairs at distance 0.
pub fn stress(positions: &[[f64; 2]], d: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if d[i][j] > 0.0 {
                let r = dist(positions[i], positions[j]) - d[i][j];
                s += r * r / (d[i][j] * d[i][j]);
            }
        }
    }
    s
}

/// Gradient descent with backtracking from a seeded circular start; only
/// steps that do not increase stress are taken. The result is centered on
/// the origin and scaled so its mean pairwise distance equals the mean of
/// `d`.
pub fn stress_layout_clusters(d: &[Vec<f64>], iterations: usize, seed: u64) -> StressLayout {
    let k = d.len();
    if k <= 1 {
        return StressLayout { positions: vec![[0.0, 0.0]; k], trace: vec![0.0; k] };
    }
    let mean_d = mean_offdiag(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
    let radius = if mean_d > 0.0 { mean_d / 2.0 } else { 1.0 };
    let mut p: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / k as f64;
            let r = radius * (1.0 + 0.1 * rng.gen::<f64>());
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let mut current = stress(&p, d);
    let mut trace = vec![current];
    let mut step = radius.max(1e-9);
    for _ in 0..iterations {
        let g = gradient(&p, d);
        let norm = g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt();
        if norm < 1e-12 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<[f64; 2]> = p
                .iter()
                .zip(&g)
                .map(|(x, v)| [x[0] - step * v[0] / norm, x[1] - step * v[1] / norm])
                .collect();
            let s = stress(&trial, d);
            if s <= current {
                p = trial;
                current = s;
                trace.push(s);
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    normalize(&mut p, mean_d);
    StressLayout { positions: p, trace }
}

fn gradient(p: &[[f64; 2]], d: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut g = vec![[0.0; 2]; p.len()];
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if d[i][j] <= 0.0 {
                continue;
            }
            let r = dist(p[i], p[j]).max(1e-12);
            let coef = 2.0 * (r - d[i][j]) / (d[i][j] * d[i][j] * r);
            for c in 0..2 {
                let v = coef * (p[i][c] - p[j][c]);
                g[i][c] += v;
                g[j][c] -= v;
            }
        }
    }
    g
}

fn normalize(p: &mut [[f64; 2]], mean_d: f64) {
    let k = p.len() as f64;
    let cx = p.iter().map(|x| x[0]).sum::<f64>() / k;
    let cy = p.iter().map(|x| x[1]).sum::<f64>() / k;
    for x in p.iter_mut() {
        x[0] -= cx;
        x[1] -= cy;
    }
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            total += dist(p[i], p[j]);
            pairs += 1.0;
        }
    }
    if total > 0.0 && mean_d > 0.0 {
        let s = mean_d / (total / pairs);
        for x in p.iter_mut() {
            x[0] *= s;
            x[1] *= s;
        }
    }
}

fn mean_offdiag(d: &[Vec<f64>]) -> f64 {
    let k = d.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            total += d[i][j];
        }
    }
    total / (k * (k - 1) / 2) as f64
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Scales center positions uniformly (never shrinking) until discs of the
/// given radii are at least `gap` apart. Coincident centers are first
/// spread onto a small circle.
pub fn separate_discs(centers: &[[f64; 2]], radii: &[f64], gap: f64) -> Vec<[f64; 2]> {
    let mut c = centers.to_vec();
    for i in 0..c.len() {
        for j in 0..i {
            if dist(c[i], c[j]) < 1e-9 {
                let a = std::f64::consts::TAU * i as f64 / c.len() as f64;
                c[i][0] += 1e-3 * a.cos();
                c[i][1] += 1e-3 * a.sin();
            }
        }
    }
    let mut scale = 1.0f64;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let need = radii[i] + radii[j] + gap;
            scale = scale.max(need / dist(c[i], c[j]));
        }
    }
    c.iter().map(|x| [x[0] * scale, x[1] * scale]).collect()
}
