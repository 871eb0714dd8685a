use std::collections::HashMap;

use rayon::prelude::*;

use super::{dot, sub, Vec3};

/// Uniform hash grid over a point set.
#[derive(Clone, Debug)]
pub struct SpatialGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> SpatialGrid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            cells.entry(Self::key_of(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key_of(p: Vec3, cell: f64) -> [i64; 3] {
        [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ]
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(j, squared distance)` for every point `j` with
    /// `|p - points[j]| < radius`.
    pub fn for_each_within(&self, p: Vec3, radius: f64, mut f: impl FnMut(usize, f64)) {
        let reach = (radius / self.cell).ceil() as i64;
        let k = Self::key_of(p, self.cell);
        let r2 = radius * radius;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in ids {
                        let d = sub(p, self.points[j]);
                        let d2 = dot(d, d);
                        if d2 < r2 {
                            f(j, d2);
                        }
                    }
                }
            }
        }
    }

    /// Distance from `points[i]` to its nearest other point, if any.
    pub fn nearest_other(&self, i: usize) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let p = self.points[i];
        let k = Self::key_of(p, self.cell);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                            continue;
                        };
                        for &j in ids {
                            if j != i {
                                let d = sub(p, self.points[j]);
                                best = best.min(dot(d, d));
                            }
                        }
                    }
                }
            }
            // Everything outside the searched rings is at least `ring * cell` away.
            if best.sqrt() <= ring as f64 * self.cell {
                return Some(best.sqrt());
            }
            ring += 1;
        }
    }
}

/// Mean distance from each point to its nearest neighbour; 0 for fewer
/// than two points.
pub fn mean_nearest_neighbor_distance(points: &[Vec3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if extent == 0.0 {
        return 0.0;
    }
    let cell = extent / (points.len() as f64).sqrt().max(1.0);
    let grid = SpatialGrid::new(points, cell);
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| grid.nearest_other(i).unwrap_or(0.0))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / points.len() as f64
}
