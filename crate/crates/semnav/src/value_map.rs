//! Semantic value map and confidence map.
//!
//! Action scores from the scorer are projected into the field of view with a
//! viewing-confidence cone (exponential decay with distance, squared-cosine
//! decay toward the FOV edge), then fused into the running per-cell value and
//! confidence via a confidence-weighted average. Frontier candidates are
//! ranked by querying the fused map around their midpoints.

use serde::{Deserialize, Serialize};

use crate::frontier::Frontier;
use crate::occupancy::{line_of_sight, CellIndex, CellState, GridPose, OccupancyGrid};

/// Denominator slack used in all fusion formulas.
pub const FUSE_EPSILON: f64 = 1e-6;

/// The four action probabilities, each clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionScores {
    pub forward: f64,
    pub backward: f64,
    pub left: f64,
    pub right: f64,
}

impl ActionScores {
    pub fn new(forward: f64, backward: f64, left: f64, right: f64) -> Self {
        Self {
            forward: forward.clamp(0.0, 1.0),
            backward: backward.clamp(0.0, 1.0),
            left: left.clamp(0.0, 1.0),
            right: right.clamp(0.0, 1.0),
        }
    }

    pub fn uniform() -> Self {
        Self::new(0.25, 0.25, 0.25, 0.25)
    }

    /// Value at a bearing offset from the heading, by linear interpolation
    /// between the two nearest action anchors (forward 0, left +90 deg,
    /// right -90 deg, backward +-180 deg).
    pub fn interpolate(&self, bearing_offset: f64) -> f64 {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let b = crate::occupancy::normalize_angle(bearing_offset);
        let mag = b.abs();
        if mag <= half_pi {
            let t = mag / half_pi;
            let side = if b >= 0.0 { self.left } else { self.right };
            (1.0 - t) * self.forward + t * side
        } else {
            let t = (mag - half_pi) / half_pi;
            let side = if b >= 0.0 { self.left } else { self.right };
            (1.0 - t) * side + t * self.backward
        }
    }
}

/// Viewing-confidence cone parameters. Distances are in cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConeParams {
    /// Distance decay, per cell.
    pub lambda: f64,
    /// Field of view in radians.
    pub theta_fov: f64,
    /// Maximum projection range in cells.
    pub max_range: f64,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            theta_fov: 79.0_f64.to_radians(),
            max_range: 50.0,
        }
    }
}

/// Confidence for a point at distance `d` cells and angle `theta` off the
/// view axis: `exp(-lambda d) * cos^2(theta / (fov/2) * pi/2)`.
///
/// Returns 0 outside the FOV.
pub fn viewing_confidence(d: f64, theta: f64, params: &ConeParams) -> f64 {
    let half_fov = params.theta_fov / 2.0;
    if theta.abs() > half_fov {
        return 0.0;
    }
    let angular = (theta / half_fov * std::f64::consts::FRAC_PI_2).cos();
    (-params.lambda * d).exp() * angular * angular
}

/// One projected observation: cell, semantic value, viewing confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedCell {
    pub cell: CellIndex,
    pub value: f64,
    pub confidence: f64,
}

/// Project action scores into the FOV.
///
/// Covers Free/Unknown cells within `max_range` and the FOV half-angle that
/// have line of sight from the pose; Obstacle cells and occluded cells are
/// excluded.
pub fn project_scores(
    pose: &GridPose,
    scores: &ActionScores,
    grid: &OccupancyGrid,
    params: &ConeParams,
) -> Vec<ProjectedCell> {
    let half_fov = params.theta_fov / 2.0;
    let r = params.max_range.ceil() as i32;
    let (px, py) = pose.cell();
    let mut out = Vec::new();
    for y in (py - r).max(0)..=(py + r).min(grid.height() as i32 - 1) {
        for x in (px - r).max(0)..=(px + r).min(grid.width() as i32 - 1) {
            let cell = (x, y);
            if grid.state(cell) == CellState::Obstacle {
                continue;
            }
            let cx = x as f64 + 0.5;
            let cy = y as f64 + 0.5;
            let d = ((cx - pose.x).powi(2) + (cy - pose.y).powi(2)).sqrt();
            if d > params.max_range {
                continue;
            }
            let theta = if d < 1e-9 {
                0.0
            } else {
                crate::occupancy::normalize_angle((cy - pose.y).atan2(cx - pose.x) - pose.heading)
            };
            if theta.abs() > half_fov {
                continue;
            }
            if !line_of_sight((pose.x, pose.y), cell, |c| grid.state(c) == CellState::Obstacle) {
                continue;
            }
            out.push(ProjectedCell {
                cell,
                value: scores.interpolate(theta),
                confidence: viewing_confidence(d, theta, params),
            });
        }
    }
    out
}

/// Scalar form of the fusion update: combine a current observation
/// `(v_cur, c_cur)` with the stored `(v_prev, c_prev)`.
pub fn fuse_pair(v_cur: f64, c_cur: f64, v_prev: f64, c_prev: f64) -> (f64, f64) {
    let denom = c_cur + c_prev + FUSE_EPSILON;
    (
        (c_cur * v_cur + c_prev * v_prev) / denom,
        (c_cur * c_cur + c_prev * c_prev) / denom,
    )
}

/// Paired per-cell semantic value (init 0.5) and confidence (init 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    confidences: Vec<f64>,
}

impl ValueMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.5; width * height],
            confidences: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn idx(&self, cell: CellIndex) -> Option<usize> {
        if cell.0 >= 0 && cell.1 >= 0 && (cell.0 as usize) < self.width && (cell.1 as usize) < self.height {
            Some(cell.1 as usize * self.width + cell.0 as usize)
        } else {
            None
        }
    }

    pub fn value(&self, cell: CellIndex) -> f64 {
        self.idx(cell).map(|i| self.values[i]).unwrap_or(0.5)
    }

    pub fn confidence(&self, cell: CellIndex) -> f64 {
        self.idx(cell).map(|i| self.confidences[i]).unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    /// Confidence-weighted fusion of a projected field into the map.
    ///
    /// For each covered cell, with `(v_cur, c_cur)` from the field and
    /// `(v_prev, c_prev)` from the map:
    /// `v_new = (c_cur v_cur + c_prev v_prev) / (c_cur + c_prev + eps)` and
    /// `c_new = (c_cur^2 + c_prev^2) / (c_cur + c_prev + eps)`.
    pub fn fuse(&mut self, field: &[ProjectedCell]) {
        for p in field {
            if let Some(i) = self.idx(p.cell) {
                let (v, c) = fuse_pair(p.value, p.confidence, self.values[i], self.confidences[i]);
                self.values[i] = v;
                self.confidences[i] = c;
            }
        }
    }

    /// Confidence-weighted mean value over the disk of `radius` cells around
    /// the frontier midpoint; falls back to the 0.5 prior when the disk holds
    /// almost no confidence.
    pub fn query(&self, frontier: &Frontier, radius: f64) -> f64 {
        let (mx, my) = frontier.midpoint;
        let r = radius.ceil() as i32;
        let mut num = 0.0;
        let mut den = 0.0;
        for y in my - r..=my + r {
            for x in mx - r..=mx + r {
                let dx = (x - mx) as f64;
                let dy = (y - my) as f64;
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                if let Some(i) = self.idx((x, y)) {
                    num += self.confidences[i] * self.values[i];
                    den += self.confidences[i];
                }
            }
        }
        if den < FUSE_EPSILON {
            0.5
        } else {
            num / den
        }
    }

    /// Grayscale PGM of the values, intensity = round(255 * v).
    pub fn values_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|v| (255.0 * v).round() as u8));
        out
    }

    /// Grayscale PGM of the confidences, normalized to the max confidence.
    pub fn confidences_pgm(&self) -> Vec<u8> {
        let max = self.confidences.iter().cloned().fold(0.0_f64, f64::max).max(FUSE_EPSILON);
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.confidences.iter().map(|c| (255.0 * c / max).round() as u8));
        out
    }
}
