//! Deterministic 2D grid-world simulator: world loading/generation, ray-cast
//! depth sensing, agent motion with collision veto, and the oracle object
//! detector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::AgentAction;
use crate::occupancy::{line_of_sight, normalize_angle, CellIndex, DepthScan, GridPose};
use crate::render::{egocentric_render, ImageRgb};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world block is not rectangular")]
    NotRectangular,
    #[error("world must contain exactly one start cell 'S' (found {0})")]
    StartCount(usize),
    #[error("world must contain at least one target cell 'T'")]
    MissingTarget,
    #[error("invalid character {0:?} in world block")]
    InvalidChar(char),
    #[error("world border must be all obstacles")]
    OpenBorder,
    #[error("world is empty")]
    Empty,
}

/// Simulation parameters. Defaults follow common embodied-navigation
/// conventions: 0.25 m step, 30 degree turn, 5 m sensor, 79 degree HFOV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    pub resolution: f64,
    pub max_range_m: f64,
    pub fov: f64,
    pub n_rays: usize,
    pub step_m: f64,
    pub turn_angle: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            max_range_m: 5.0,
            fov: 79.0_f64.to_radians(),
            n_rays: 120,
            step_m: 0.25,
            turn_angle: 30.0_f64.to_radians(),
        }
    }
}

impl SimParams {
    pub fn max_range_cells(&self) -> f64 {
        self.max_range_m / self.resolution
    }
}

/// Ground-truth world: obstacle grid, target cells, start pose.
#[derive(Debug, Clone)]
pub struct World {
    width: usize,
    height: usize,
    obstacles: Vec<bool>,
    pub targets: Vec<CellIndex>,
    pub start: GridPose,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub scan: DepthScan,
    pub egocentric: ImageRgb,
    pub target_detected: bool,
    pub detected_cell: Option<CellIndex>,
}

impl World {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_obstacle(&self, cell: CellIndex) -> bool {
        if cell.0 < 0 || cell.1 < 0 || cell.0 as usize >= self.width || cell.1 as usize >= self.height {
            return true;
        }
        self.obstacles[cell.1 as usize * self.width + cell.0 as usize]
    }

    pub fn is_free(&self, cell: CellIndex) -> bool {
        !self.is_obstacle(cell)
    }

    /// Parse an ASCII block: `#` obstacle, `.` free, `S` start (exactly one),
    /// `T` target (at least one).
    pub fn from_ascii(text: &str) -> Result<Self, WorldError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(WorldError::Empty);
        }
        let width = lines[0].chars().count();
        if lines.iter().any(|l| l.chars().count() != width) {
            return Err(WorldError::NotRectangular);
        }
        let height = lines.len();
        let mut obstacles = vec![false; width * height];
        let mut targets = Vec::new();
        let mut starts = Vec::new();
        for (y, line) in lines.iter().enumerate() {
            for (x, ch) in line.chars().enumerate() {
                match ch {
                    '#' => obstacles[y * width + x] = true,
                    '.' => {}
                    'S' => starts.push((x as i32, y as i32)),
                    'T' => targets.push((x as i32, y as i32)),
                    other => return Err(WorldError::InvalidChar(other)),
                }
            }
        }
        if starts.len() != 1 {
            return Err(WorldError::StartCount(starts.len()));
        }
        if targets.is_empty() {
            return Err(WorldError::MissingTarget);
        }
        let border_closed = (0..width).all(|x| obstacles[x] && obstacles[(height - 1) * width + x])
            && (0..height).all(|y| obstacles[y * width] && obstacles[y * width + width - 1]);
        if !border_closed {
            return Err(WorldError::OpenBorder);
        }
        let start = GridPose::new(starts[0].0 as f64 + 0.5, starts[0].1 as f64 + 0.5, 0.0);
        Ok(Self {
            width,
            height,
            obstacles,
            targets,
            start,
            seed: 0,
        })
    }

    pub fn to_ascii(&self) -> String {
        let start_cell = self.start.cell();
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let ch = if (x, y) == start_cell {
                    'S'
                } else if self.targets.contains(&(x, y)) {
                    'T'
                } else if self.is_obstacle((x, y)) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    /// Cast a single ray. Returns the first obstacle cell and the distance
    /// (cells) from the ray origin to that cell's center.
    pub fn raycast(&self, from: (f64, f64), angle: f64, max_range_cells: f64) -> Option<(CellIndex, f64)> {
        let (dx, dy) = (angle.cos(), angle.sin());
        // Amanatides-Woo grid traversal.
        let mut cx = from.0.floor() as i32;
        let mut cy = from.1.floor() as i32;
        let step_x: i32 = if dx > 0.0 { 1 } else { -1 };
        let step_y: i32 = if dy > 0.0 { 1 } else { -1 };
        let next_bx = if dx > 0.0 { cx as f64 + 1.0 } else { cx as f64 };
        let next_by = if dy > 0.0 { cy as f64 + 1.0 } else { cy as f64 };
        let mut t_max_x = if dx.abs() < 1e-12 { f64::INFINITY } else { (next_bx - from.0) / dx };
        let mut t_max_y = if dy.abs() < 1e-12 { f64::INFINITY } else { (next_by - from.1) / dy };
        let t_delta_x = if dx.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dx.abs() };
        let t_delta_y = if dy.abs() < 1e-12 { f64::INFINITY } else { 1.0 / dy.abs() };
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
            if t_entry > max_range_cells {
                return None;
            }
            if self.is_obstacle((cx, cy)) {
                let center = (cx as f64 + 0.5, cy as f64 + 0.5);
                let d = ((center.0 - from.0).powi(2) + (center.1 - from.1).powi(2)).sqrt();
                return Some(((cx, cy), d.min(max_range_cells)));
            }
        }
    }

    /// Nearest target cell by center distance, in cells.
    pub fn nearest_target(&self, pose: &GridPose) -> (CellIndex, f64) {
        let mut best = (self.targets[0], f64::INFINITY);
        for &t in &self.targets {
            let d = ((t.0 as f64 + 0.5 - pose.x).powi(2) + (t.1 as f64 + 0.5 - pose.y).powi(2)).sqrt();
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }

    /// Oracle detection rule: nearest target within sensor range, inside the
    /// FOV, with line of sight.
    pub fn detect_target(&self, pose: &GridPose, params: &SimParams) -> Option<CellIndex> {
        let (cell, d) = self.nearest_target(pose);
        if d > params.max_range_cells() {
            return None;
        }
        let bearing = normalize_angle(
            (cell.1 as f64 + 0.5 - pose.y).atan2(cell.0 as f64 + 0.5 - pose.x) - pose.heading,
        );
        if bearing.abs() > params.fov / 2.0 {
            return None;
        }
        if !line_of_sight((pose.x, pose.y), cell, |c| self.is_obstacle(c)) {
            return None;
        }
        Some(cell)
    }

    /// Flood fill over free cells from the start; true when every free cell
    /// (and every target) is reachable.
    pub fn fully_connected(&self) -> bool {
        let start = self.start.cell();
        if self.is_obstacle(start) {
            return false;
        }
        let mut visited = vec![false; self.width * self.height];
        let mut queue = std::collections::VecDeque::new();
        visited[start.1 as usize * self.width + start.0 as usize] = true;
        queue.push_back(start);
        let mut reached = 1usize;
        while let Some((x, y)) = queue.pop_front() {
            for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                if self.is_free((nx, ny)) {
                    let i = ny as usize * self.width + nx as usize;
                    if !visited[i] {
                        visited[i] = true;
                        reached += 1;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
        let free_total = self.obstacles.iter().filter(|&&o| !o).count();
        reached == free_total && self.targets.iter().all(|t| visited[t.1 as usize * self.width + t.0 as usize])
    }
}

/// Take one sensor reading at `pose`.
pub fn sense(world: &World, pose: &GridPose, params: &SimParams) -> Observation {
    let n = params.n_rays.max(2);
    let half = params.fov / 2.0;
    let max_cells = params.max_range_cells();
    let mut angles = Vec::with_capacity(n);
    let mut ranges = Vec::with_capacity(n);
    let mut hits = Vec::with_capacity(n);
    let detected = world.detect_target(pose, params);
    let target_bearing = detected.map(|c| {
        normalize_angle((c.1 as f64 + 0.5 - pose.y).atan2(c.0 as f64 + 0.5 - pose.x) - pose.heading)
    });
    let mut target_rays = Vec::with_capacity(n);
    for i in 0..n {
        let a = -half + params.fov * i as f64 / (n - 1) as f64;
        angles.push(a);
        match world.raycast((pose.x, pose.y), pose.heading + a, max_cells) {
            Some((_, d)) => {
                ranges.push(d * params.resolution);
                hits.push(true);
            }
            None => {
                ranges.push(params.max_range_m);
                hits.push(false);
            }
        }
        target_rays.push(target_bearing.map(|b| (b - a).abs() < 0.06).unwrap_or(false));
    }
    let scan = DepthScan { angles, ranges, hits };
    let egocentric = egocentric_render(&scan, params.max_range_m, &target_rays);
    Observation {
        scan,
        egocentric,
        target_detected: detected.is_some(),
        detected_cell: detected,
    }
}

/// Apply one primitive action. Translations are vetoed (pose unchanged,
/// `moved = false`) when any cell along the motion segment is an obstacle.
pub fn apply_action(
    world: &World,
    pose: &GridPose,
    action: AgentAction,
    params: &SimParams,
) -> (GridPose, bool) {
    match action {
        AgentAction::Stop => (*pose, false),
        AgentAction::TurnLeft => (GridPose::new(pose.x, pose.y, pose.heading + params.turn_angle), true),
        AgentAction::TurnRight => (GridPose::new(pose.x, pose.y, pose.heading - params.turn_angle), true),
        AgentAction::Forward | AgentAction::Backward => {
            let sign = if action == AgentAction::Forward { 1.0 } else { -1.0 };
            let dist_cells = sign * params.step_m / params.resolution;
            let (dx, dy) = (pose.heading.cos(), pose.heading.sin());
            let samples = (dist_cells.abs() * 4.0).ceil() as usize;
            for s in 1..=samples {
                let t = dist_cells * s as f64 / samples as f64;
                let cell = ((pose.x + dx * t).floor() as i32, (pose.y + dy * t).floor() as i32);
                if world.is_obstacle(cell) {
                    return (*pose, false);
                }
            }
            (
                GridPose::new(pose.x + dx * dist_cells, pose.y + dy * dist_cells, pose.heading),
                true,
            )
        }
    }
}

/// Room-and-corridor layout generator. Identical seed yields an identical
/// world; free space is always fully connected (regenerates until it is).
pub fn generate_world(seed: u64, rooms: usize, width: usize, height: usize) -> World {
    assert!(rooms >= 1 && width >= 16 && height >= 16);
    for attempt in 0..64 {
        let world = try_generate(seed.wrapping_add(attempt * 0x9e37_79b9), seed, rooms, width, height);
        if let Some(w) = world {
            if w.fully_connected() {
                return w;
            }
        }
    }
    unreachable!("world generation failed to converge for seed {seed}");
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: i32,
    y: i32,
    w: i32,
    h: i32,
}

impl Rect {
    fn center(&self) -> CellIndex {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

fn try_generate(rng_seed: u64, seed: u64, rooms: usize, width: usize, height: usize) -> Option<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut obstacles = vec![true; width * height];

    // BSP split into `rooms` leaves.
    let mut leaves = vec![Rect {
        x: 1,
        y: 1,
        w: width as i32 - 2,
        h: height as i32 - 2,
    }];
    while leaves.len() < rooms {
        // Split the largest leaf.
        let (idx, _) = leaves
            .iter()
            .enumerate()
            .max_by_key(|(_, r)| r.w * r.h)?;
        let r = leaves.swap_remove(idx);
        let min_side = 10;
        let (a, b) = if r.w >= r.h && r.w >= 2 * min_side {
            let cut = rng.gen_range(min_side..=r.w - min_side);
            (
                Rect { x: r.x, y: r.y, w: cut, h: r.h },
                Rect { x: r.x + cut, y: r.y, w: r.w - cut, h: r.h },
            )
        } else if r.h >= 2 * min_side {
            let cut = rng.gen_range(min_side..=r.h - min_side);
            (
                Rect { x: r.x, y: r.y, w: r.w, h: cut },
                Rect { x: r.x, y: r.y + cut, w: r.w, h: r.h - cut },
            )
        } else {
            leaves.push(r);
            return None; // too small to keep splitting
        };
        leaves.push(a);
        leaves.push(b);
    }

    // Carve a room inside each leaf.
    let mut room_rects = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let margin = 2;
        let rw = (leaf.w - 2 * margin).max(4);
        let rh = (leaf.h - 2 * margin).max(4);
        let room = Rect {
            x: leaf.x + (leaf.w - rw) / 2,
            y: leaf.y + (leaf.h - rh) / 2,
            w: rw,
            h: rh,
        };
        for y in room.y..room.y + room.h {
            for x in room.x..room.x + room.w {
                if x > 0 && y > 0 && (x as usize) < width - 1 && (y as usize) < height - 1 {
                    obstacles[y as usize * width + x as usize] = false;
                }
            }
        }
        room_rects.push(room);
    }

    // L-shaped corridors (width 3) chaining room centers.
    let mut order: Vec<usize> = (0..room_rects.len()).collect();
    order.sort_by_key(|&i| room_rects[i].center());
    for pair in order.windows(2) {
        let a = room_rects[pair[0]].center();
        let b = room_rects[pair[1]].center();
        carve_corridor(&mut obstacles, width, height, a, b, rng.gen_bool(0.5));
    }

    // Start in the first room, target in the room farthest from it.
    let start_room = room_rects[0];
    let start_cell = start_room.center();
    let target_room = if room_rects.len() >= 2 {
        *room_rects[1..]
            .iter()
            .max_by_key(|r| {
                let c = r.center();
                (c.0 - start_cell.0).pow(2) + (c.1 - start_cell.1).pow(2)
            })
            .unwrap()
    } else {
        start_room
    };
    let tx = rng.gen_range(target_room.x..target_room.x + target_room.w);
    let ty = rng.gen_range(target_room.y..target_room.y + target_room.h);
    let target = (tx, ty);
    if obstacles[ty as usize * width + tx as usize] {
        return None;
    }
    if obstacles[start_cell.1 as usize * width + start_cell.0 as usize] {
        return None;
    }
    Some(World {
        width,
        height,
        obstacles,
        targets: vec![target],
        start: GridPose::new(start_cell.0 as f64 + 0.5, start_cell.1 as f64 + 0.5, 0.0),
        seed,
    })
}

fn carve_corridor(
    obstacles: &mut [bool],
    width: usize,
    height: usize,
    a: CellIndex,
    b: CellIndex,
    horizontal_first: bool,
) {
    let mut carve = |x: i32, y: i32| {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (cx, cy) = (x + dx, y + dy);
                if cx > 0 && cy > 0 && (cx as usize) < width - 1 && (cy as usize) < height - 1 {
                    obstacles[cy as usize * width + cx as usize] = false;
                }
            }
        }
    };
    let (mid_x, mid_y) = if horizontal_first { (b.0, a.1) } else { (a.0, b.1) };
    for x in a.0.min(mid_x)..=a.0.max(mid_x) {
        carve(x, a.1);
    }
    for y in a.1.min(mid_y)..=a.1.max(mid_y) {
        carve(mid_x, y);
    }
    for x in mid_x.min(b.0)..=mid_x.max(b.0) {
        carve(x, b.1);
    }
    for y in mid_y.min(b.1)..=mid_y.max(b.1) {
        carve(b.0, y);
    }
}

/// Scripted corridor world for the loop-breaking scenario: a long east-west
/// corridor with a north-south cross corridor (two dead-end arms) between
/// the start and the target at the east end. Seeds nudge the junction
/// position and arm lengths.
pub fn corridor_world(seed: u64) -> World {
    let width = 120usize;
    let height = 64usize;
    let mut obstacles = vec![true; width * height];
    let mid_y = (height / 2) as i32;
    let junction_x = 18 + (seed % 5) as i32;
    let arm = 22 + (seed % 3) as i32;
    let mut carve = |x: i32, y: i32| {
        if x > 0 && y > 0 && (x as usize) < width - 1 && (y as usize) < height - 1 {
            obstacles[y as usize * width + x as usize] = false;
        }
    };
    for x in 2..width as i32 - 2 {
        for dy in -1..=1 {
            carve(x, mid_y + dy);
        }
    }
    for y in (mid_y - arm).max(1)..=(mid_y + arm).min(height as i32 - 2) {
        for dx in -1..=1 {
            carve(junction_x + dx, y);
        }
    }
    World {
        width,
        height,
        obstacles,
        targets: vec![(width as i32 - 4, mid_y)],
        start: GridPose::new(4.5, mid_y as f64 + 0.5, 0.0),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_world_errors() {
        assert!(matches!(
            World::from_ascii("###\n#S#\n###"),
            Err(WorldError::MissingTarget)
        ));
        let two_starts = "#####\n#S.S#\n#..T#\n#####";
        assert!(matches!(World::from_ascii(two_starts), Err(WorldError::StartCount(2))));
        let ragged = "####\n#S.T#\n####";
        assert!(matches!(World::from_ascii(ragged), Err(WorldError::NotRectangular)));
    }

    #[test]
    fn ascii_world_roundtrip() {
        let text = "#####\n#S.T#\n#####\n";
        let w = World::from_ascii(text).unwrap();
        assert_eq!(w.start.cell(), (1, 1));
        assert_eq!(w.targets, vec![(3, 1)]);
        assert_eq!(w.to_ascii(), text);
    }

    #[test]
    fn raycast_hits_wall_at_center_distance() {
        // Agent at center of cell (1, 1) facing a wall at (3, 1).
        let w = World::from_ascii("#####\n#S.#T\n#####").err();
        assert!(w.is_some()); // border open on purpose above; build a valid one
        let world = World::from_ascii("######\n#S.#T#\n######");
        // T outside the wall is unreachable -> construct differently.
        let world = match world {
            Ok(w) => w,
            Err(_) => World::from_ascii("#####\n#S.T#\n#####").unwrap(),
        };
        let pose = world.start;
        let hit = world.raycast((pose.x, pose.y), 0.0, 50.0);
        assert!(hit.is_some());
    }

    #[test]
    fn sense_center_ray_distance() {
        // Wall 2 cells ahead of the start cell.
        let text = "#######\n#..S#.#\n#######";
        let mut world = World::from_ascii(&text.replace("#.#", "#T#")).unwrap();
        world.start = GridPose::new(3.5, 1.5, 0.0);
        let params = SimParams {
            resolution: 0.1,
            ..SimParams::default()
        };
        let obs = sense(&world, &world.start, &params);
        let center = obs.scan.len() / 2;
        assert!(obs.scan.hits[center]);
        // Wall cell at x=4, one cell ahead: center distance 1.0 cells = 0.1 m.
        assert!((obs.scan.ranges[center] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn open_corridor_center_ray_is_max_range() {
        let world = corridor_world(1);
        let params = SimParams::default();
        let obs = sense(&world, &world.start, &params);
        let center = obs.scan.len() / 2;
        assert!(!obs.scan.hits[center]);
        assert_eq!(obs.scan.ranges[center], params.max_range_m);
    }

    #[test]
    fn target_behind_agent_not_detected() {
        let world = World::from_ascii("#####\n#T.S#\n#####").unwrap();
        let params = SimParams::default();
        let obs = sense(&world, &world.start, &params); // heading 0 = +x, target at -x
        assert!(!obs.target_detected);
    }

    #[test]
    fn forward_into_wall_is_vetoed() {
        let world = World::from_ascii("#####\n#.ST#\n#####").unwrap();
        let mut params = SimParams::default();
        params.resolution = 1.0;
        params.step_m = 2.0; // two cells, straight into the east border wall
        let (pose, moved) = apply_action(&world, &world.start, AgentAction::Forward, &params);
        assert!(!moved);
        assert_eq!(pose, world.start);
    }

    #[test]
    fn turn_left_adds_turn_angle() {
        let world = corridor_world(0);
        let params = SimParams::default();
        let (pose, moved) = apply_action(&world, &world.start, AgentAction::TurnLeft, &params);
        assert!(moved);
        assert!((pose.heading - params.turn_angle).abs() < 1e-12);
    }

    #[test]
    fn forward_advances_by_step_over_resolution() {
        let world = corridor_world(0);
        let params = SimParams::default();
        let (pose, moved) = apply_action(&world, &world.start, AgentAction::Forward, &params);
        assert!(moved);
        assert!((pose.x - (world.start.x + 2.5)).abs() < 1e-12);
    }

    #[test]
    fn generated_worlds_are_deterministic_and_connected() {
        let a = generate_world(7, 4, 64, 64);
        let b = generate_world(7, 4, 64, 64);
        assert_eq!(a.to_ascii(), b.to_ascii());
        assert!(a.fully_connected());
    }

    #[test]
    fn single_room_world_keeps_target_with_start() {
        let w = generate_world(3, 1, 32, 32);
        assert!(w.fully_connected());
    }
}
