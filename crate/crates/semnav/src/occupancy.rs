//! Tri-state occupancy grid built from depth scans, plus the agent pose and
//! cell/world coordinate conversions.
//!
//! Cell states only ever harden: `Unknown -> Free`, `Unknown -> Obstacle` and
//! `Free -> Obstacle` are the legal transitions; an `Obstacle` is never
//! demoted. All pose coordinates are in continuous cell units; `resolution`
//! converts to meters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid cell index as `(x, y)` = `(col, row)`.
pub type CellIndex = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Unknown,
    Free,
    Obstacle,
}

#[derive(Debug, Error)]
pub enum OccupancyError {
    #[error("pose ({x:.2}, {y:.2}) outside grid bounds {width}x{height}")]
    PoseOutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
}

/// Agent pose in continuous cell coordinates with heading in radians.
///
/// Heading 0 points along +x; positive headings turn counter-clockwise
/// (toward +y). Heading is kept normalized to `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl GridPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite());
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    /// Cell containing this pose.
    pub fn cell(&self) -> CellIndex {
        (self.x.floor() as i32, self.y.floor() as i32)
    }

    /// Euclidean distance to another pose, in cells (heading ignored).
    pub fn distance_to(&self, other: &GridPose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Normalize an angle to `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r >= std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// World point (meters) to containing cell.
pub fn world_to_cell(x_m: f64, y_m: f64, resolution: f64) -> CellIndex {
    ((x_m / resolution).floor() as i32, (y_m / resolution).floor() as i32)
}

/// Cell to the world coordinates (meters) of its center.
pub fn cell_to_world(cell: CellIndex, resolution: f64) -> (f64, f64) {
    (
        (cell.0 as f64 + 0.5) * resolution,
        (cell.1 as f64 + 0.5) * resolution,
    )
}

/// One depth observation: ray bearings relative to the heading, hit ranges in
/// meters (`max_range` for misses) and per-ray hit flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthScan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub hits: Vec<bool>,
}

impl DepthScan {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            width,
            height,
            resolution,
            cells: vec![CellState::Unknown; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn in_bounds(&self, cell: CellIndex) -> bool {
        cell.0 >= 0 && cell.1 >= 0 && (cell.0 as usize) < self.width && (cell.1 as usize) < self.height
    }

    fn idx(&self, cell: CellIndex) -> usize {
        cell.1 as usize * self.width + cell.0 as usize
    }

    pub fn state(&self, cell: CellIndex) -> CellState {
        if self.in_bounds(cell) {
            self.cells[self.idx(cell)]
        } else {
            CellState::Unknown
        }
    }

    /// Unknown -> Free only; Free and Obstacle are left as they are.
    pub fn mark_free(&mut self, cell: CellIndex) {
        if self.in_bounds(cell) {
            let i = self.idx(cell);
            if self.cells[i] == CellState::Unknown {
                self.cells[i] = CellState::Free;
            }
        }
    }

    /// Unknown/Free -> Obstacle; obstacles are permanent.
    pub fn mark_obstacle(&mut self, cell: CellIndex) {
        if self.in_bounds(cell) {
            let i = self.idx(cell);
            self.cells[i] = CellState::Obstacle;
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (CellIndex, CellState)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).map(move |x| {
                let cell = (x as i32, y as i32);
                (cell, self.state(cell))
            })
        })
    }

    /// Integrate one depth scan taken at `pose`.
    ///
    /// Cells traversed by each ray are marked Free, exclusive of the agent's
    /// own cell and of the terminal cell of a hitting ray, which is marked
    /// Obstacle. Non-hitting rays mark Free out to their full range.
    pub fn integrate_depth(&mut self, pose: &GridPose, scan: &DepthScan) -> Result<(), OccupancyError> {
        if !self.in_bounds(pose.cell()) {
            return Err(OccupancyError::PoseOutOfBounds {
                x: pose.x,
                y: pose.y,
                width: self.width,
                height: self.height,
            });
        }
        let start = pose.cell();
        for i in 0..scan.len() {
            let dir = pose.heading + scan.angles[i];
            let range_cells = scan.ranges[i] / self.resolution;
            let (dx, dy) = (dir.cos(), dir.sin());
            // Sub-cell stepping along the ray; dedupe consecutive cells. For
            // hitting rays, walk slightly past the range: the reported range
            // is the distance to the hit cell's *center*, which for oblique
            // rays lies off the ray line, so the hit cell must be recovered
            // from the traversed cells rather than by flooring the endpoint.
            // Exact grid traversal (Amanatides-Woo), matching how the depth
            // sensor walks cells. The reported range of a hitting ray is the
            // distance to the hit cell's *center*, which for oblique rays lies
            // off the ray line, so the hit cell is identified by matching that
            // center distance along the traversal rather than by projecting
            // the range onto the ray.
            let mut cx = pose.x.floor() as i32;
            let mut cy = pose.y.floor() as i32;
            let step_x: i32 = if dx > 0.0 { 1 } else { -1 };
            let step_y: i32 = if dy > 0.0 { 1 } else { -1 };
            let next_bx = if dx > 0.0 { cx as f64 + 1.0 } else { cx as f64 };
            let next_by = if dy > 0.0 { cy as f64 + 1.0 } else { cy as f64 };
            let mut t_max_x = if dx.abs() < 1e-12 { f64::INFINITY } else { (next_bx - pose.x) / dx };
            let mut t_max_y = if dy.abs() < 1e-12 { f64::INFINITY } else { (next_by - pose.y) / dy };
            let t_delta_x = if dx.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dx.abs() };
            let t_delta_y = if dy.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dy.abs() };
            // Walk a little past the range when the ray hit something: the
            // hit-cell center can be slightly farther along than the crossing
            // point where the ray entered the cell.
            let t_stop = if scan.hits[i] { range_cells + 2.0 } else { range_cells };
            loop {
                let t_entry;
                if t_max_x < t_max_y {
                    t_entry = t_max_x;
                    t_max_x += t_delta_x;
                    cx += step_x;
                } else {
                    t_entry = t_max_y;
                    t_max_y += t_delta_y;
                    cy += step_y;
                }
                if t_entry > t_stop {
                    break;
                }
                let cell = (cx, cy);
                if scan.hits[i] {
                    let dc = ((cx as f64 + 0.5 - pose.x).powi(2)
                        + (cy as f64 + 0.5 - pose.y).powi(2))
                    .sqrt();
                    if (dc - range_cells).abs() < 1e-6 {
                        if cell != start {
                            self.mark_obstacle(cell);
                        }
                        break;
                    }
                }
                // Past the range a cell can only be the hit cell, never free.
                if cell != start && t_entry <= range_cells {
                    self.mark_free(cell);
                }
            }
        }
        Ok(())
    }

    /// PGM (P5) export: Unknown=127, Free=255, Obstacle=0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.cells.iter().map(|c| match c {
            CellState::Unknown => 127u8,
            CellState::Free => 255,
            CellState::Obstacle => 0,
        }));
        out
    }
}

/// True when no Obstacle cell lies strictly between `from` and the center of
/// `to` (the endpoint cells themselves are not checked).
pub fn line_of_sight<F>(from: (f64, f64), to: CellIndex, is_obstacle: F) -> bool
where
    F: Fn(CellIndex) -> bool,
{
    let target = (to.0 as f64 + 0.5, to.1 as f64 + 0.5);
    let (dx, dy) = (target.0 - from.0, target.1 - from.1);
    let dist = (dx * dx + dy * dy).sqrt();
    if dist < 1e-9 {
        return true;
    }
    let start_cell = (from.0.floor() as i32, from.1.floor() as i32);
    let steps = (dist / 0.2).ceil() as usize;
    for s in 1..steps {
        let t = s as f64 / steps as f64;
        let cell = (
            (from.0 + dx * t).floor() as i32,
            (from.1 + dy * t).floor() as i32,
        );
        if cell == start_cell || cell == to {
            continue;
        }
        if is_obstacle(cell) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_single(angle: f64, range: f64, hit: bool) -> DepthScan {
        DepthScan {
            angles: vec![angle],
            ranges: vec![range],
            hits: vec![hit],
        }
    }

    #[test]
    fn single_ray_marks_free_then_obstacle() {
        // 11x11, pose at center, ray hitting a wall cell 3 cells ahead.
        let mut grid = OccupancyGrid::new(11, 11, 1.0);
        let pose = GridPose::new(5.5, 5.5, 0.0);
        grid.integrate_depth(&pose, &scan_single(0.0, 3.0, true)).unwrap();
        assert_eq!(grid.count(CellState::Free), 2);
        assert_eq!(grid.count(CellState::Obstacle), 1);
        assert_eq!(grid.state((6, 5)), CellState::Free);
        assert_eq!(grid.state((7, 5)), CellState::Free);
        assert_eq!(grid.state((8, 5)), CellState::Obstacle);
    }

    #[test]
    fn empty_scan_leaves_grid_unchanged() {
        let mut grid = OccupancyGrid::new(11, 11, 1.0);
        let pose = GridPose::new(5.5, 5.5, 0.0);
        let scan = DepthScan {
            angles: vec![],
            ranges: vec![],
            hits: vec![],
        };
        grid.integrate_depth(&pose, &scan).unwrap();
        assert_eq!(grid.count(CellState::Unknown), 121);
    }

    #[test]
    fn integration_is_idempotent() {
        let mut grid = OccupancyGrid::new(11, 11, 1.0);
        let pose = GridPose::new(5.5, 5.5, 0.3);
        let scan = DepthScan {
            angles: vec![-0.2, 0.0, 0.2],
            ranges: vec![3.0, 4.0, 2.5],
            hits: vec![true, false, true],
        };
        grid.integrate_depth(&pose, &scan).unwrap();
        let snapshot = grid.clone();
        grid.integrate_depth(&pose, &scan).unwrap();
        assert_eq!(grid.to_pgm(), snapshot.to_pgm());
    }

    #[test]
    fn obstacle_never_demoted() {
        let mut grid = OccupancyGrid::new(5, 5, 1.0);
        grid.mark_obstacle((2, 2));
        grid.mark_free((2, 2));
        assert_eq!(grid.state((2, 2)), CellState::Obstacle);
    }

    #[test]
    fn out_of_bounds_pose_rejected() {
        let mut grid = OccupancyGrid::new(5, 5, 1.0);
        let pose = GridPose::new(-1.0, 2.0, 0.0);
        assert!(grid.integrate_depth(&pose, &scan_single(0.0, 1.0, false)).is_err());
    }

    #[test]
    fn world_cell_conversions() {
        assert_eq!(world_to_cell(0.0, 0.0, 0.1), (0, 0));
        assert_eq!(world_to_cell(0.25, 0.19, 0.1), (2, 1));
        let (wx, wy) = cell_to_world((5, 7), 0.1);
        assert_eq!(world_to_cell(wx, wy, 0.1), (5, 7));
    }

    #[test]
    fn heading_normalization() {
        let p = GridPose::new(0.0, 0.0, std::f64::consts::PI);
        assert!(p.heading >= -std::f64::consts::PI && p.heading < std::f64::consts::PI);
        let q = GridPose::new(0.0, 0.0, 3.0 * std::f64::consts::PI + 0.1);
        assert!((q.heading - (0.1 - std::f64::consts::PI)).abs() < 1e-12);
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalized_angles_land_in_half_open_range(a in -1e4..1e4f64) {
            let n = normalize_angle(a);
            prop_assert!(n >= -std::f64::consts::PI && n < std::f64::consts::PI);
            // Normalizing again is a no-op.
            prop_assert!((normalize_angle(n) - n).abs() < 1e-12);
        }

        #[test]
        fn cell_conversion_round_trips(x in -100.0..100.0f64, y in -100.0..100.0f64) {
            let res = 0.1;
            let cell = world_to_cell(x, y, res);
            let (cx, cy) = cell_to_world(cell, res);
            // Cell center is within half a cell of the original point.
            prop_assert!((cx - x).abs() <= res / 2.0 + 1e-12);
            prop_assert!((cy - y).abs() <= res / 2.0 + 1e-12);
        }
    }
}
