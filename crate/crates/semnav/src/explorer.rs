//! The per-step exploration state machine: update the map, detect frontiers,
//! query the scorer, fuse the value map, pick a waypoint, emit one primitive
//! action, and hand off to goal navigation once the target is confirmed by
//! both the scorer and the detector.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{detect_frontiers, Frontier};
use crate::history::{ActionHistory, AgentAction};
use crate::occupancy::{normalize_angle, CellIndex, CellState, GridPose, OccupancyGrid};
use crate::prompts::{generate_prompt, CoTLevel, PromptRequest};
use crate::render::{topdown_render, ImageRgb};
use crate::scorer::{QueryContext, Scorer, ScorerRequest, ScorerResponse};
use crate::simworld::{Observation, SimParams};
use crate::value_map::{project_scores, ActionScores, ConeParams, ValueMap};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("no traversable path from {from:?} to {to:?}")]
    Unreachable { from: CellIndex, to: CellIndex },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub target_category: String,
    pub cot_level: CoTLevel,
    pub use_history: bool,
    pub use_topdown_map: bool,
    pub max_steps: usize,
    pub cone: ConeParams,
    /// Stagnation: net displacement below `disp_threshold` cells over the
    /// last `disp_window` steps, or strict turn alternation over `osc_window`.
    pub disp_window: usize,
    pub disp_threshold: f64,
    pub osc_window: usize,
    /// Steps the fallback action persists once stagnation fires.
    pub fallback_persistence: usize,
    pub success_radius_m: f64,
    pub min_frontier_size: usize,
    pub query_radius: f64,
    pub unknown_penalty: f64,
    /// Consult the scorer every N steps (1 = every step).
    pub scorer_every: usize,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            target_category: "tv".to_string(),
            cot_level: CoTLevel::Full,
            use_history: true,
            use_topdown_map: true,
            max_steps: 500,
            cone: ConeParams::default(),
            disp_window: 8,
            disp_threshold: 2.0,
            osc_window: 6,
            fallback_persistence: 3,
            success_radius_m: 1.0,
            min_frontier_size: 3,
            query_radius: 5.0,
            unknown_penalty: 2.0,
            scorer_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploring,
    GoalNavigation,
    DoneSuccess,
    DoneFailure,
}

impl Phase {
    pub fn is_done(&self) -> bool {
        matches!(self, Phase::DoneSuccess | Phase::DoneFailure)
    }
}

/// Everything one step reports outward, for traces and metrics.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub action: AgentAction,
    pub phase: Phase,
    pub frontier_count: usize,
    pub waypoint: Option<CellIndex>,
    pub scores: ActionScores,
    pub stagnation: bool,
    pub scorer_fallback: bool,
    pub scorer_latency_ms: f64,
}

pub struct Explorer {
    pub config: ExplorerConfig,
    sim: SimParams,
    pub grid: OccupancyGrid,
    pub value_map: ValueMap,
    pub history: ActionHistory,
    phase: Phase,
    step_count: usize,
    goal_cell: Option<CellIndex>,
    fallback_left: usize,
    fallback_action: AgentAction,
    /// Steps after a fallback burst during which stagnation is not re-checked,
    /// giving waypoint pursuit room to produce displacement again.
    stagnation_cooldown: usize,
    rotation_scan_left: usize,
    rotation_scan_spent: bool,
    /// Cells the agent has stood on; drives patrol goal selection once the
    /// map holds no frontiers but the target is still unfound.
    visited: HashSet<CellIndex>,
    patrol_goal: Option<CellIndex>,
    cached_response: Option<ScorerResponse>,
    blank_map: ImageRgb,
    /// Actual scorer invocations (cache hits and goal-phase steps excluded).
    pub scorer_queries: usize,
    /// Invocations that errored and fell back to uniform scores.
    pub scorer_fallbacks: usize,
}

impl Explorer {
    pub fn new(config: ExplorerConfig, sim: SimParams, grid_width: usize, grid_height: usize, start: GridPose) -> Self {
        Self {
            config,
            sim,
            grid: OccupancyGrid::new(grid_width, grid_height, sim.resolution),
            value_map: ValueMap::new(grid_width, grid_height),
            history: ActionHistory::with_start(start),
            phase: Phase::Exploring,
            step_count: 0,
            goal_cell: None,
            fallback_left: 0,
            fallback_action: AgentAction::Forward,
            stagnation_cooldown: 0,
            rotation_scan_left: 0,
            rotation_scan_spent: false,
            visited: HashSet::new(),
            patrol_goal: None,
            cached_response: None,
            blank_map: ImageRgb::filled(grid_width, grid_height, [0, 0, 0]),
            scorer_queries: 0,
            scorer_fallbacks: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn steps_taken(&self) -> usize {
        self.step_count
    }

    /// Record the executed action and the pose the simulator produced.
    pub fn after_step(&mut self, action: AgentAction, resulting_pose: GridPose) {
        self.history.push(action, resulting_pose);
    }

    fn success_radius_cells(&self) -> f64 {
        self.config.success_radius_m / self.sim.resolution
    }

    /// Free-space depth (cells) along each action anchor, on the agent's own
    /// map. Unknown cells pass; only known obstacles stop the probe.
    fn sector_depths(&self, pose: &GridPose) -> [f64; 4] {
        let anchors = [
            0.0,
            std::f64::consts::PI,
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
        ];
        let mut out = [0.0; 4];
        for (i, a) in anchors.iter().enumerate() {
            let dir = pose.heading + a;
            let (dx, dy) = (dir.cos(), dir.sin());
            let mut depth = self.config.cone.max_range;
            let steps = (self.config.cone.max_range * 2.0) as usize;
            for s in 1..=steps {
                let t = s as f64 / 2.0;
                let cell = ((pose.x + dx * t).floor() as i32, (pose.y + dy * t).floor() as i32);
                if !self.grid.in_bounds(cell) || self.grid.state(cell) == CellState::Obstacle {
                    depth = t;
                    break;
                }
            }
            out[i] = depth;
        }
        out
    }

    fn query_scorer(
        &mut self,
        pose: &GridPose,
        obs: &Observation,
        scorer: &dyn Scorer,
    ) -> (ScorerResponse, bool, f64) {
        let reuse = self.config.scorer_every > 1
            && (self.step_count - 1) % self.config.scorer_every != 0
            && self.cached_response.is_some();
        if reuse {
            return (self.cached_response.clone().unwrap(), false, 0.0);
        }
        let history_rendering = if self.config.use_history {
            self.history.render_for_prompt()
        } else {
            String::new()
        };
        let prompt = generate_prompt(&PromptRequest {
            level: self.config.cot_level,
            target_category: self.config.target_category.clone(),
            history_rendering,
        })
        .expect("target category validated at config time");
        let topdown = if self.config.use_topdown_map {
            topdown_render(&self.grid, pose)
        } else {
            self.blank_map.clone()
        };
        let request = ScorerRequest {
            egocentric_render: obs.egocentric.clone(),
            topdown_render: topdown,
            prompt,
            target_category: self.config.target_category.clone(),
        };
        let ctx = QueryContext {
            pose: *pose,
            sector_depths: self.sector_depths(pose),
        };
        let start = std::time::Instant::now();
        self.scorer_queries += 1;
        let (response, fell_back) = match scorer.score(&request, &ctx) {
            Ok(r) => (r, false),
            Err(e) => {
                log::warn!("scorer failed, using uniform fallback scores: {e}");
                self.scorer_fallbacks += 1;
                (
                    ScorerResponse {
                        scores: ActionScores::uniform(),
                        target_found: false,
                        reasoning: format!("scorer error: {e}"),
                        room_label: None,
                    },
                    true,
                )
            }
        };
        let latency = start.elapsed().as_secs_f64() * 1e3;
        self.cached_response = Some(response.clone());
        (response, fell_back, latency)
    }

    /// One full iteration of the exploration loop.
    pub fn step(&mut self, pose: &GridPose, obs: &Observation, scorer: &dyn Scorer) -> StepOutcome {
        debug_assert!(!self.phase.is_done());
        self.step_count += 1;

        self.grid
            .integrate_depth(pose, &obs.scan)
            .expect("simulator keeps the pose inside the world");
        self.grid.mark_free(pose.cell());
        self.visited.insert(pose.cell());

        if self.step_count > self.config.max_steps {
            self.phase = Phase::DoneFailure;
            return self.outcome(AgentAction::Stop, 0, None, ActionScores::uniform(), false, false, 0.0);
        }

        // Goal phase never consults the scorer.
        if self.phase == Phase::GoalNavigation {
            // Refresh the goal cell while the target is in view; when it
            // drops out of the sensor cone, keep driving to the last known
            // cell rather than resuming exploration — targets do not move.
            if obs.target_detected {
                self.goal_cell = obs.detected_cell;
            }
            let action = self.goal_step(pose);
            return self.outcome(action, 0, self.goal_cell, ActionScores::uniform(), false, false, 0.0);
        }

        // Small components are noise while bigger ones exist, but a narrow
        // doorway can legitimately leave only a 1-2 cell frontier; fall back
        // to the unfiltered set rather than declaring exploration finished.
        let mut frontiers = detect_frontiers(&self.grid, self.config.min_frontier_size);
        if frontiers.is_empty() {
            frontiers = detect_frontiers(&self.grid, 1);
        }
        let (response, scorer_fallback, latency) = self.query_scorer(pose, obs, scorer);

        let field = project_scores(pose, &response.scores, &self.grid, &self.config.cone);
        self.value_map.fuse(&field);

        if response.target_found && obs.target_detected {
            self.phase = Phase::GoalNavigation;
            self.goal_cell = obs.detected_cell;
            let action = self.goal_step(pose);
            return self.outcome(
                action,
                frontiers.len(),
                self.goal_cell,
                response.scores,
                false,
                scorer_fallback,
                latency,
            );
        }

        // Loop breaking takes precedence over waypoint pursuit.
        if self.config.use_history {
            if self.fallback_left > 0 {
                self.fallback_left -= 1;
                if self.fallback_left == 0 {
                    self.stagnation_cooldown = self.config.disp_window;
                }
                return self.outcome(
                    self.fallback_action,
                    frontiers.len(),
                    None,
                    response.scores,
                    true,
                    scorer_fallback,
                    latency,
                );
            }
            let stagnant = if self.stagnation_cooldown > 0 {
                self.stagnation_cooldown -= 1;
                false
            } else {
                self.history.detect_stagnation(self.config.disp_window, self.config.disp_threshold)
                    || self.history.detect_stagnation(self.config.osc_window, 0.0)
            };
            if stagnant {
                self.fallback_action = self.history.fallback_action();
                self.fallback_left = self.config.fallback_persistence.saturating_sub(1);
                if self.fallback_left == 0 {
                    self.stagnation_cooldown = self.config.disp_window;
                }
                return self.outcome(
                    self.fallback_action,
                    frontiers.len(),
                    None,
                    response.scores,
                    true,
                    scorer_fallback,
                    latency,
                );
            }
        }

        let valued: Vec<(Frontier, f64)> = frontiers
            .iter()
            .map(|f| (f.clone(), self.value_map.query(f, self.config.query_radius)))
            .collect();
        let frontier_count = valued.len();

        let mut candidates = valued;
        loop {
            let Some(waypoint) = select_waypoint(&candidates, pose) else {
                // No frontier: one full in-place rotation scan, then give up.
                if self.rotation_scan_left > 0 {
                    self.rotation_scan_left -= 1;
                    return self.outcome(
                        AgentAction::TurnLeft,
                        frontier_count,
                        None,
                        response.scores,
                        false,
                        scorer_fallback,
                        latency,
                    );
                }
                if !self.rotation_scan_spent {
                    self.rotation_scan_spent = true;
                    self.rotation_scan_left =
                        (std::f64::consts::TAU / self.sim.turn_angle).ceil() as usize - 1;
                    return self.outcome(
                        AgentAction::TurnLeft,
                        frontier_count,
                        None,
                        response.scores,
                        false,
                        scorer_fallback,
                        latency,
                    );
                }
                // Map fully explored but target unfound: patrol the known
                // free space, rotating at each patrol point, until either
                // the detector fires or no unvisited free cell remains.
                return self.patrol_step(pose, frontier_count, response.scores, scorer_fallback, latency);
            };
            let goal = waypoint.midpoint;
            match plan_path(&self.grid, pose.cell(), goal, self.config.unknown_penalty) {
                Ok(path) => {
                    // Fresh frontiers exist again; allow a future rotation scan.
                    self.rotation_scan_spent = false;
                    let action = follow_path(
                        &self.grid,
                        pose,
                        &path,
                        self.sim.turn_angle,
                        self.sim.step_m / self.sim.resolution,
                    );
                    return self.outcome(
                        action,
                        frontier_count,
                        Some(goal),
                        response.scores,
                        false,
                        scorer_fallback,
                        latency,
                    );
                }
                Err(_) => {
                    candidates.retain(|(f, _)| f.midpoint != goal);
                }
            }
        }
    }

    fn patrol_step(
        &mut self,
        pose: &GridPose,
        frontier_count: usize,
        scores: ActionScores,
        scorer_fallback: bool,
        latency: f64,
    ) -> StepOutcome {
        loop {
            let Some(goal) = self.patrol_goal else {
                match self.pick_patrol_goal() {
                    Some(g) => {
                        self.patrol_goal = Some(g);
                        continue;
                    }
                    None => {
                        self.phase = Phase::DoneFailure;
                        return self.outcome(
                            AgentAction::Stop,
                            frontier_count,
                            None,
                            scores,
                            false,
                            scorer_fallback,
                            latency,
                        );
                    }
                }
            };
            let d = ((goal.0 as f64 + 0.5 - pose.x).powi(2) + (goal.1 as f64 + 0.5 - pose.y).powi(2)).sqrt();
            if d <= 2.0 {
                // Arrived: spin a full scan here before picking the next spot.
                self.visited.insert(goal);
                self.patrol_goal = None;
                self.rotation_scan_left = (std::f64::consts::TAU / self.sim.turn_angle).ceil() as usize - 1;
                return self.outcome(
                    AgentAction::TurnLeft,
                    frontier_count,
                    Some(goal),
                    scores,
                    false,
                    scorer_fallback,
                    latency,
                );
            }
            match plan_path(&self.grid, pose.cell(), goal, self.config.unknown_penalty) {
                Ok(path) => {
                    let action = follow_path(
                        &self.grid,
                        pose,
                        &path,
                        self.sim.turn_angle,
                        self.sim.step_m / self.sim.resolution,
                    );
                    return self.outcome(
                        action,
                        frontier_count,
                        Some(goal),
                        scores,
                        false,
                        scorer_fallback,
                        latency,
                    );
                }
                Err(_) => {
                    self.visited.insert(goal);
                    self.patrol_goal = None;
                }
            }
        }
    }

    /// Unvisited free cell farthest (over free-space hops) from everywhere
    /// the agent has already stood. Deterministic: ties resolve to the
    /// lowest (row, column).
    fn pick_patrol_goal(&self) -> Option<CellIndex> {
        let w = self.grid.width() as i32;
        let h = self.grid.height() as i32;
        let idx = |c: CellIndex| (c.1 * w + c.0) as usize;
        let mut dist = vec![u32::MAX; (w * h) as usize];
        let mut queue = VecDeque::new();
        for &c in &self.visited {
            if self.grid.in_bounds(c) {
                dist[idx(c)] = 0;
                queue.push_back(c);
            }
        }
        while let Some(c) = queue.pop_front() {
            let d = dist[idx(c)];
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = (c.0 + dx, c.1 + dy);
                    if self.grid.in_bounds(n)
                        && self.grid.state(n) == CellState::Free
                        && dist[idx(n)] == u32::MAX
                    {
                        dist[idx(n)] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        let mut best: Option<(u32, CellIndex)> = None;
        for y in 0..h {
            for x in 0..w {
                let c = (x, y);
                let d = dist[idx(c)];
                if d == u32::MAX || d == 0 || self.visited.contains(&c) {
                    continue;
                }
                if self.grid.state(c) != CellState::Free {
                    continue;
                }
                if best.map(|(bd, _)| d > bd).unwrap_or(true) {
                    best = Some((d, c));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn goal_step(&mut self, pose: &GridPose) -> AgentAction {
        let goal = self.goal_cell.expect("goal phase carries a detection cell");
        let dist = ((goal.0 as f64 + 0.5 - pose.x).powi(2) + (goal.1 as f64 + 0.5 - pose.y).powi(2)).sqrt();
        if dist <= self.success_radius_cells() {
            self.phase = Phase::DoneSuccess;
            return AgentAction::Stop;
        }
        match plan_path(&self.grid, pose.cell(), goal, self.config.unknown_penalty) {
            Ok(path) => follow_path(
                &self.grid,
                pose,
                &path,
                self.sim.turn_angle,
                self.sim.step_m / self.sim.resolution,
            ),
            Err(_) => {
                self.phase = Phase::DoneFailure;
                AgentAction::Stop
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn outcome(
        &self,
        action: AgentAction,
        frontier_count: usize,
        waypoint: Option<CellIndex>,
        scores: ActionScores,
        stagnation: bool,
        scorer_fallback: bool,
        scorer_latency_ms: f64,
    ) -> StepOutcome {
        StepOutcome {
            action,
            phase: self.phase,
            frontier_count,
            waypoint,
            scores,
            stagnation,
            scorer_fallback,
            scorer_latency_ms,
        }
    }
}

/// Highest-value frontier; ties broken by distance from the pose, then by
/// midpoint `(row, col)`.
pub fn select_waypoint<'a>(frontiers: &'a [(Frontier, f64)], pose: &GridPose) -> Option<&'a Frontier> {
    frontiers
        .iter()
        .min_by(|(fa, va), (fb, vb)| {
            vb.partial_cmp(va)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    let da = midpoint_dist(fa, pose);
                    let db = midpoint_dist(fb, pose);
                    da.partial_cmp(&db).unwrap_or(Ordering::Equal)
                })
                .then_with(|| (fa.midpoint.1, fa.midpoint.0).cmp(&(fb.midpoint.1, fb.midpoint.0)))
        })
        .map(|(f, _)| f)
}

fn midpoint_dist(f: &Frontier, pose: &GridPose) -> f64 {
    ((f.midpoint.0 as f64 + 0.5 - pose.x).powi(2) + (f.midpoint.1 as f64 + 0.5 - pose.y).powi(2)).sqrt()
}

#[derive(PartialEq)]
struct HeapEntry {
    f: f64,
    cell: CellIndex,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, deterministic tie-break on cell.
        other
            .f
            .partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected A* over Free cells (diagonal cost sqrt(2)); Unknown cells are
/// traversable at `unknown_penalty` times the base cost, Obstacles never.
/// Diagonal motion through an obstacle corner is forbidden.
pub fn plan_path(
    grid: &OccupancyGrid,
    from: CellIndex,
    to: CellIndex,
    unknown_penalty: f64,
) -> Result<Vec<CellIndex>, PathError> {
    let w = grid.width() as i32;
    let h = grid.height() as i32;
    let idx = |c: CellIndex| (c.1 * w + c.0) as usize;
    if !grid.in_bounds(from) || !grid.in_bounds(to) {
        return Err(PathError::Unreachable { from, to });
    }
    let heuristic = |c: CellIndex| {
        let dx = (c.0 - to.0).abs() as f64;
        let dy = (c.1 - to.1).abs() as f64;
        // Octile distance.
        dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
    };
    let mut dist = vec![f64::INFINITY; (w * h) as usize];
    let mut prev: Vec<Option<CellIndex>> = vec![None; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    dist[idx(from)] = 0.0;
    heap.push(HeapEntry { f: heuristic(from), cell: from });
    while let Some(HeapEntry { cell, .. }) = heap.pop() {
        if cell == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = prev[idx(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(path);
        }
        let base = dist[idx(cell)];
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let n = (cell.0 + dx, cell.1 + dy);
                // The goal cell is passable even when it is an obstacle: a
                // detected target is itself a solid object, and navigation
                // stops at the success radius before reaching it.
                if !grid.in_bounds(n) || (grid.state(n) == CellState::Obstacle && n != to) {
                    continue;
                }
                if dx != 0 && dy != 0 {
                    // No corner cutting.
                    if grid.state((cell.0 + dx, cell.1)) == CellState::Obstacle
                        || grid.state((cell.0, cell.1 + dy)) == CellState::Obstacle
                    {
                        continue;
                    }
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let penalty = if grid.state(n) == CellState::Unknown { unknown_penalty } else { 1.0 };
                let nd = base + step * penalty;
                if nd < dist[idx(n)] {
                    dist[idx(n)] = nd;
                    prev[idx(n)] = Some(cell);
                    heap.push(HeapEntry { f: nd + heuristic(n), cell: n });
                }
            }
        }
    }
    Err(PathError::Unreachable { from, to })
}

/// Cost of a planned path in cell units (diagonals sqrt(2), no penalties).
pub fn path_cost(path: &[CellIndex]) -> f64 {
    path.windows(2)
        .map(|w| {
            if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            }
        })
        .sum()
}

/// True when a forward step of `dist_cells` along `heading` stays off every
/// known obstacle on the agent's map (Unknown cells pass).
fn forward_clear(grid: &OccupancyGrid, pose: &GridPose, heading: f64, dist_cells: f64) -> bool {
    let (dx, dy) = (heading.cos(), heading.sin());
    let samples = (dist_cells * 4.0).ceil() as usize;
    for s in 1..=samples {
        let t = dist_cells * s as f64 / samples as f64;
        let cell = ((pose.x + dx * t).floor() as i32, (pose.y + dy * t).floor() as i32);
        if !grid.in_bounds(cell) || grid.state(cell) == CellState::Obstacle {
            return false;
        }
    }
    true
}

/// Convert the next path segment into one primitive.
///
/// Headings are quantized to `turn_angle` increments, so exact alignment with
/// the path is usually impossible; a naive "turn until roughly aligned, then
/// go forward" can pick a forward sweep that clips a known wall the planner
/// routed around, and the resulting veto repeats forever. Instead, choose
/// the reachable heading closest to the segment bearing whose forward sweep
/// is clear on the agent's own map, and take one step toward it.
fn follow_path(
    grid: &OccupancyGrid,
    pose: &GridPose,
    path: &[CellIndex],
    turn_angle: f64,
    step_cells: f64,
) -> AgentAction {
    // Aim at the first path cell far enough ahead to avoid overshoot jitter.
    let aim = path
        .iter()
        .find(|c| {
            let d = ((c.0 as f64 + 0.5 - pose.x).powi(2) + (c.1 as f64 + 0.5 - pose.y).powi(2)).sqrt();
            d >= 1.8
        })
        .or_else(|| path.last())
        .copied();
    let Some(aim) = aim else {
        return AgentAction::TurnLeft;
    };
    let d = ((aim.0 as f64 + 0.5 - pose.x).powi(2) + (aim.1 as f64 + 0.5 - pose.y).powi(2)).sqrt();
    if d < 0.5 {
        // Standing on the waypoint; look around for new frontier area.
        return AgentAction::TurnLeft;
    }
    let bearing = (aim.1 as f64 + 0.5 - pose.y).atan2(aim.0 as f64 + 0.5 - pose.x);
    let half_turns = ((std::f64::consts::TAU / turn_angle).round() as i32) / 2;
    let mut best: Option<(f64, i32)> = None;
    for k in -half_turns..=half_turns {
        let heading = pose.heading + k as f64 * turn_angle;
        if !forward_clear(grid, pose, heading, step_cells) {
            continue;
        }
        let diff = normalize_angle(bearing - heading).abs();
        let better = match best {
            None => true,
            Some((bd, bk)) => diff < bd - 1e-9 || ((diff - bd).abs() <= 1e-9 && k.abs() < bk.abs()),
        };
        if better {
            best = Some((diff, k));
        }
    }
    match best {
        // Boxed in on the map: rotate and rescan.
        None => AgentAction::TurnLeft,
        Some((_, 0)) => AgentAction::Forward,
        Some((_, k)) if k > 0 => AgentAction::TurnLeft,
        Some(_) => AgentAction::TurnRight,
    }
}
