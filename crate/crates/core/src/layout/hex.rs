use std::collections::HashMap;

/// Axial hex coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Hex {
    pub q: i32,
    pub r: i32,
}

const DIRECTIONS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

impl Hex {
    pub fn new(q: i32, r: i32) -> Self {
        Hex { q, r }
    }

    /// Cartesian center at unit spacing.
    pub fn center(self) -> [f64; 2] {
        [self.q as f64 + self.r as f64 / 2.0, self.r as f64 * 3f64.sqrt() / 2.0]
    }

    /// Squared cartesian distance to the origin, exact in integers.
    pub fn norm2(self) -> i64 {
        let (q, r) = (self.q as i64, self.r as i64);
        q * q + q * r + r * r
    }

    pub fn ring(self) -> i32 {
        (self.q.abs() + self.r.abs() + (self.q + self.r).abs()) / 2
    }

    /// Angle of the center around the origin, in [0, 2π).
    pub fn angle(self) -> f64 {
        let [x, y] = self.center();
        y.atan2(x).rem_euclid(std::f64::consts::TAU)
    }

    pub fn neighbors(self) -> impl Iterator<Item = Hex> {
        DIRECTIONS.iter().map(move |&(dq, dr)| Hex::new(self.q + dq, self.r + dr))
    }
}

/// Cells packed around the origin, ordered by distance to it (then angle).
/// Cell `i`'s neighbors are the adjacent cells that belong to the grid.
#[derive(Clone, Debug)]
pub struct HexGrid {
    cells: Vec<Hex>,
    index: HashMap<Hex, usize>,
    neighbors: Vec<Vec<usize>>,
}

impl HexGrid {
    /// Grid for `members` architectures and `reserved_reps` summary glyphs,
    /// each glyph claiming six cells beyond its own.
    pub fn for_cluster(members: usize, reserved_reps: usize) -> Self {
        Self::with_cells((members + 6 * reserved_reps).max(1))
    }

    /// The `count` cells nearest the origin.
    pub fn with_cells(count: usize) -> Self {
        let mut rings = 0i32;
        while 1 + 3 * rings as usize * (rings as usize + 1) < count {
            rings += 1;
        }
        let mut all = Vec::new();
        for q in -rings..=rings {
            for r in -rings..=rings {
                let h = Hex::new(q, r);
                if h.ring() <= rings {
                    all.push(h);
                }
            }
        }
        all.sort_by(|a, b| {
            a.norm2()
                .cmp(&b.norm2())
                .then(a.angle().total_cmp(&b.angle()))
        });
        all.truncate(count);
        let index: HashMap<Hex, usize> = all.iter().enumerate().map(|(i, &h)| (h, i)).collect();
        let neighbors = all
            .iter()
            .map(|h| h.neighbors().filter_map(|n| index.get(&n).copied()).collect())
            .collect();
        HexGrid { cells: all, index, neighbors }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> Hex {
        self.cells[i]
    }

    pub fn cells(&self) -> &[Hex] {
        &self.cells
    }

    pub fn index_of(&self, h: Hex) -> Option<usize> {
        self.index.get(&h).copied()
    }

    /// Adjacent cells inside the grid.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.neighbors[i].len() == 6
    }

    /// Distance from the origin to the farthest cell edge.
    pub fn radius(&self) -> f64 {
        let far = self.cells.iter().map(|h| h.norm2()).max().unwrap_or(0);
        (far as f64).sqrt() + 0.5
    }
}
