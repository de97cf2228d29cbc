//! Episode aggregation: success rate and success-weighted path length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::occupancy::{CellIndex, GridPose};
use crate::simworld::World;

/// One finished episode, in the units everything downstream expects:
/// path lengths in meters, translation distance only (turns are free).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub path_length_m: f64,
    pub shortest_path_m: f64,
    /// Start already inside the success radius: excluded from SPL/SR.
    pub degenerate: bool,
    pub scorer_fallbacks: usize,
    pub scorer_queries: usize,
}

/// Success rate over non-degenerate episodes, in [0, 1].
pub fn success_rate(results: &[EpisodeResult]) -> f64 {
    let valid: Vec<_> = results.iter().filter(|r| !r.degenerate).collect();
    if valid.is_empty() {
        return 0.0;
    }
    valid.iter().filter(|r| r.success).count() as f64 / valid.len() as f64
}

/// Success-weighted path length: mean over non-degenerate episodes of
/// `S * l / max(p, l)` with `l` the shortest path and `p` the agent's path.
pub fn spl(results: &[EpisodeResult]) -> f64 {
    let valid: Vec<_> = results.iter().filter(|r| !r.degenerate).collect();
    if valid.is_empty() {
        return 0.0;
    }
    let total: f64 = valid
        .iter()
        .map(|r| {
            if !r.success {
                return 0.0;
            }
            let l = r.shortest_path_m;
            let p = r.path_length_m;
            if l <= 0.0 {
                // Shouldn't happen for non-degenerate episodes; count as perfect.
                1.0
            } else {
                l / p.max(l)
            }
        })
        .sum();
    total / valid.len() as f64
}

#[derive(PartialEq)]
struct Entry {
    d: f64,
    cell: CellIndex,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .partial_cmp(&self.d)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ground-truth shortest path (meters) from `start` to the first cell whose
/// center lies within `success_radius_m` of any target, by 8-connected
/// Dijkstra over the true free space. Returns `None` when no target is
/// reachable, and `Some(0.0)` when the start already qualifies.
pub fn shortest_path_oracle(
    world: &World,
    start: &GridPose,
    success_radius_m: f64,
    resolution: f64,
) -> Option<f64> {
    let radius_cells = success_radius_m / resolution;
    let in_radius = |c: CellIndex| {
        world.targets.iter().any(|t| {
            let dx = (c.0 - t.0) as f64;
            let dy = (c.1 - t.1) as f64;
            (dx * dx + dy * dy).sqrt() <= radius_cells
        })
    };
    let start_cell = start.cell();
    if in_radius(start_cell) {
        return Some(0.0);
    }
    let w = world.width() as i32;
    let h = world.height() as i32;
    let idx = |c: CellIndex| (c.1 * w + c.0) as usize;
    let mut dist = vec![f64::INFINITY; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    dist[idx(start_cell)] = 0.0;
    heap.push(Entry { d: 0.0, cell: start_cell });
    while let Some(Entry { d, cell }) = heap.pop() {
        if d > dist[idx(cell)] {
            continue;
        }
        if in_radius(cell) {
            return Some(d * resolution);
        }
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let n = (cell.0 + dx, cell.1 + dy);
                if n.0 < 0 || n.1 < 0 || n.0 >= w || n.1 >= h || !world.is_free(n) {
                    continue;
                }
                if dx != 0 && dy != 0 && (!world.is_free((cell.0 + dx, cell.1)) || !world.is_free((cell.0, cell.1 + dy))) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nd = d + step;
                if nd < dist[idx(n)] {
                    dist[idx(n)] = nd;
                    heap.push(Entry { d: nd, cell: n });
                }
            }
        }
    }
    None
}
