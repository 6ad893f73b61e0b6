//! Placement of structure glyphs (small DAG drawings) outside cluster discs.

use crate::layout::stress::dist;

/// Width and height of a structure glyph box, in layout units.
pub const LABEL_SIZE: [f64; 2] = [4.0, 3.0];
const MARGIN: f64 = 0.5;
const ANGLE_STEPS: usize = 24;
const MAX_RINGS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

/// For each target point (a representative's cell, belonging to disc
/// `owner`), the center of a label box that overlaps no disc and no other
/// label. Rings around the owner disc are searched outward; within a ring,
/// angles closest to the target's own direction come first.
pub fn place_labels(discs: &[Disc], targets: &[(usize, [f64; 2])], size: [f64; 2]) -> Vec<[f64; 2]> {
    let half_diag = (size[0] * size[0] + size[1] * size[1]).sqrt() / 2.0;
    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(targets.len());
    for &(owner, target) in targets {
        let disc = discs[owner];
        let base = (target[1] - disc.center[1]).atan2(target[0] - disc.center[0]);
        let mut found = None;
        'rings: for ring in 0..MAX_RINGS {
            let r = disc.radius + MARGIN + half_diag + ring as f64 * size[1];
            for k in 0..ANGLE_STEPS {
                // 0, +1, -1, +2, -2, ...
                let off = if k % 2 == 1 { (k / 2 + 1) as f64 } else { -((k / 2) as f64) };
                let a = base + off * std::f64::consts::TAU / ANGLE_STEPS as f64;
                let c = [disc.center[0] + r * a.cos(), disc.center[1] + r * a.sin()];
                if is_free(c, size, discs, &placed) {
                    found = Some(c);
                    break 'rings;
                }
            }
        }
        placed.push(found.expect("label ring search exhausted"));
    }
    placed
}

fn is_free(c: [f64; 2], size: [f64; 2], discs: &[Disc], placed: &[[f64; 2]]) -> bool {
    let (hw, hh) = (size[0] / 2.0, size[1] / 2.0);
    let clear_of_discs = discs.iter().all(|d| {
        let nearest = [
            d.center[0].clamp(c[0] - hw, c[0] + hw),
            d.center[1].clamp(c[1] - hh, c[1] + hh),
        ];
        dist(nearest, d.center) >= d.radius + MARGIN
    });
    clear_of_discs
        && placed
            .iter()
            .all(|p| (p[0] - c[0]).abs() >= size[0] || (p[1] - c[1]).abs() >= size[1])
}

/// Whether two label boxes of the same size intersect.
pub fn boxes_overlap(a: [f64; 2], b: [f64; 2], size: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() < size[0] && (a[1] - b[1]).abs() < size[1]
}
