//! Geometric frontier detection: boundaries between Free and Unknown space.
//!
//! A frontier cell is a Free cell with at least one 4-adjacent Unknown
//! neighbor. Frontier cells are grouped into 8-connected components; each
//! component's midpoint (the member cell nearest the centroid) is the
//! exploration waypoint candidate.

use crate::occupancy::{CellIndex, CellState, OccupancyGrid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier {
    pub cells: Vec<CellIndex>,
    pub midpoint: CellIndex,
}

impl Frontier {
    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

/// True when `cell` is Free and 4-adjacent to an Unknown cell.
pub fn is_frontier_cell(grid: &OccupancyGrid, cell: CellIndex) -> bool {
    if grid.state(cell) != CellState::Free {
        return false;
    }
    let (x, y) = cell;
    [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        .iter()
        .any(|&n| grid.in_bounds(n) && grid.state(n) == CellState::Unknown)
}

/// All maximal 8-connected frontier components with at least `min_size`
/// cells, sorted by midpoint `(row, col)`.
pub fn detect_frontiers(grid: &OccupancyGrid, min_size: usize) -> Vec<Frontier> {
    let w = grid.width() as i32;
    let h = grid.height() as i32;
    let mut is_frontier = vec![false; (w * h) as usize];
    for ((x, y), _) in grid.iter_cells() {
        if is_frontier_cell(grid, (x, y)) {
            is_frontier[(y * w + x) as usize] = true;
        }
    }

    let mut visited = vec![false; (w * h) as usize];
    let mut frontiers = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !is_frontier[i] || visited[i] {
                continue;
            }
            // BFS over the 8-connected component.
            let mut component = Vec::new();
            let mut queue = std::collections::VecDeque::new();
            visited[i] = true;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                component.push((cx, cy));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let ni = (ny * w + nx) as usize;
                        if is_frontier[ni] && !visited[ni] {
                            visited[ni] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            if component.len() >= min_size {
                let midpoint = component_midpoint(&component);
                frontiers.push(Frontier {
                    cells: component,
                    midpoint,
                });
            }
        }
    }
    frontiers.sort_by_key(|f| (f.midpoint.1, f.midpoint.0));
    frontiers
}

/// Member cell nearest the component centroid, ties broken by lowest
/// `(row, col)`.
fn component_midpoint(cells: &[CellIndex]) -> CellIndex {
    let n = cells.len() as f64;
    let cx = cells.iter().map(|c| c.0 as f64).sum::<f64>() / n;
    let cy = cells.iter().map(|c| c.1 as f64).sum::<f64>() / n;
    *cells
        .iter()
        .min_by(|a, b| {
            let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
            let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
            da.partial_cmp(&db)
                .unwrap()
                .then_with(|| (a.1, a.0).cmp(&(b.1, b.0)))
        })
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::OccupancyGrid;

    #[test]
    fn all_unknown_grid_has_no_frontiers() {
        let grid = OccupancyGrid::new(8, 8, 1.0);
        assert!(detect_frontiers(&grid, 1).is_empty());
    }

    #[test]
    fn fully_observed_grid_has_no_frontiers() {
        let mut grid = OccupancyGrid::new(8, 8, 1.0);
        for y in 0..8 {
            for x in 0..8 {
                grid.mark_free((x, y));
            }
        }
        assert!(detect_frontiers(&grid, 1).is_empty());
    }

    #[test]
    fn half_free_grid_yields_single_column_frontier() {
        // 5x5: left half (cols 0..=2) Free, right half Unknown.
        let mut grid = OccupancyGrid::new(5, 5, 1.0);
        for y in 0..5 {
            for x in 0..3 {
                grid.mark_free((x, y));
            }
        }
        let fs = detect_frontiers(&grid, 1);
        assert_eq!(fs.len(), 1);
        let mut cells = fs[0].cells.clone();
        cells.sort_unstable();
        assert_eq!(cells, vec![(2, 0), (2, 1), (2, 2), (2, 3), (2, 4)]);
        assert_eq!(fs[0].midpoint, (2, 2));
    }

    #[test]
    fn min_size_filters_small_components() {
        let mut grid = OccupancyGrid::new(5, 5, 1.0);
        grid.mark_free((0, 0));
        assert_eq!(detect_frontiers(&grid, 1).len(), 1);
        assert!(detect_frontiers(&grid, 2).is_empty());
    }
}
