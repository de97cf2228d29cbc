//! Bounded action history: loop/stagnation detection and the fallback action
//! used to break decision loops.

use serde::{Deserialize, Serialize};

use crate::occupancy::GridPose;

pub const HISTORY_CAPACITY: usize = 10;

/// Positional displacements smaller than this count as "in place".
const DISPLACEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentAction {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl AgentAction {
    pub fn name(&self) -> &'static str {
        match self {
            AgentAction::Forward => "forward",
            AgentAction::Backward => "backward",
            AgentAction::TurnLeft => "turn_left",
            AgentAction::TurnRight => "turn_right",
            AgentAction::Stop => "stop",
        }
    }
}

/// The last `HISTORY_CAPACITY` actions with the pose each produced.
///
/// The pose held before the oldest retained entry is kept so that the oldest
/// entry's displacement stays computable after eviction.
#[derive(Debug, Clone, Default)]
pub struct ActionHistory {
    anchor: Option<GridPose>,
    entries: Vec<(AgentAction, GridPose)>,
}

impl ActionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// History anchored at the episode start pose.
    pub fn with_start(pose: GridPose) -> Self {
        Self {
            anchor: Some(pose),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(AgentAction, GridPose)] {
        &self.entries
    }

    pub fn push(&mut self, action: AgentAction, resulting_pose: GridPose) {
        if self.entries.len() == HISTORY_CAPACITY {
            let (_, evicted_pose) = self.entries.remove(0);
            self.anchor = Some(evicted_pose);
        }
        self.entries.push((action, resulting_pose));
    }

    /// Pose preceding entry `i`, when known.
    fn pose_before(&self, i: usize) -> Option<GridPose> {
        if i == 0 {
            self.anchor
        } else {
            Some(self.entries[i - 1].1)
        }
    }

    /// True iff the history holds at least `window` entries and either the
    /// net displacement across the window is below `disp_threshold` cells or
    /// the window's actions strictly alternate between TurnLeft and
    /// TurnRight.
    pub fn detect_stagnation(&self, window: usize, disp_threshold: f64) -> bool {
        if window == 0 || self.entries.len() < window {
            return false;
        }
        let slice = &self.entries[self.entries.len() - window..];
        let first = self
            .pose_before(self.entries.len() - window)
            .unwrap_or(slice[0].1);
        let last = slice[window - 1].1;
        if first.distance_to(&last) < disp_threshold {
            return true;
        }
        let alternating = slice.windows(2).all(|w| {
            matches!(
                (w[0].0, w[1].0),
                (AgentAction::TurnLeft, AgentAction::TurnRight)
                    | (AgentAction::TurnRight, AgentAction::TurnLeft)
            )
        }) && matches!(slice[0].0, AgentAction::TurnLeft | AgentAction::TurnRight);
        alternating
    }

    /// Most recent action that produced positional displacement; Forward when
    /// none exists.
    pub fn fallback_action(&self) -> AgentAction {
        for i in (0..self.entries.len()).rev() {
            let (action, pose) = self.entries[i];
            if let Some(before) = self.pose_before(i) {
                if before.distance_to(&pose) > DISPLACEMENT_EPS {
                    return action;
                }
            }
        }
        AgentAction::Forward
    }

    /// Comma-separated action names, oldest first, for prompt injection.
    pub fn render_for_prompt(&self) -> String {
        if self.entries.is_empty() {
            return String::new();
        }
        let names: Vec<&str> = self.entries.iter().map(|(a, _)| a.name()).collect();
        format!("Recent actions (oldest first): {}.", names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(x: f64, y: f64) -> GridPose {
        GridPose::new(x, y, 0.0)
    }

    #[test]
    fn capacity_evicts_oldest() {
        let mut h = ActionHistory::with_start(pose(0.0, 0.0));
        for i in 0..11 {
            h.push(AgentAction::Forward, pose(i as f64 + 1.0, 0.0));
        }
        assert_eq!(h.len(), 10);
        assert_eq!(h.entries()[0].1.x, 2.0);
    }

    #[test]
    fn order_preserved() {
        let mut h = ActionHistory::new();
        h.push(AgentAction::Forward, pose(1.0, 0.0));
        h.push(AgentAction::TurnLeft, pose(1.0, 0.0));
        h.push(AgentAction::TurnRight, pose(1.0, 0.0));
        let actions: Vec<_> = h.entries().iter().map(|(a, _)| *a).collect();
        assert_eq!(
            actions,
            vec![AgentAction::Forward, AgentAction::TurnLeft, AgentAction::TurnRight]
        );
        assert_eq!(
            h.render_for_prompt(),
            "Recent actions (oldest first): forward, turn_left, turn_right."
        );
    }

    #[test]
    fn oscillation_detected() {
        let mut h = ActionHistory::with_start(pose(0.0, 0.0));
        for i in 0..6 {
            let a = if i % 2 == 0 { AgentAction::TurnLeft } else { AgentAction::TurnRight };
            h.push(a, pose(0.0, 0.0));
        }
        assert!(h.detect_stagnation(6, 0.0));
    }

    #[test]
    fn steady_progress_is_not_stagnation() {
        let mut h = ActionHistory::with_start(pose(0.0, 0.0));
        for i in 0..6 {
            h.push(AgentAction::Forward, pose(i as f64 + 1.0, 0.0));
        }
        assert!(!h.detect_stagnation(6, 2.0));
    }

    #[test]
    fn tight_circling_trips_displacement_clause() {
        // F,L,F,R,F,L circling within 1 cell over window 6, threshold 2.
        let mut h = ActionHistory::with_start(pose(0.0, 0.0));
        let seq = [
            (AgentAction::Forward, pose(0.5, 0.0)),
            (AgentAction::TurnLeft, pose(0.5, 0.0)),
            (AgentAction::Forward, pose(0.5, 0.5)),
            (AgentAction::TurnRight, pose(0.5, 0.5)),
            (AgentAction::Forward, pose(0.0, 0.5)),
            (AgentAction::TurnLeft, pose(0.0, 0.5)),
        ];
        for (a, p) in seq {
            h.push(a, p);
        }
        assert!(h.detect_stagnation(6, 2.0));
    }

    #[test]
    fn fallback_is_last_displacing_action() {
        let mut h = ActionHistory::with_start(pose(0.0, 0.0));
        h.push(AgentAction::Forward, pose(1.0, 0.0));
        h.push(AgentAction::TurnLeft, pose(1.0, 0.0));
        h.push(AgentAction::TurnRight, pose(1.0, 0.0));
        assert_eq!(h.fallback_action(), AgentAction::Forward);

        let empty = ActionHistory::new();
        assert_eq!(empty.fallback_action(), AgentAction::Forward);

        let mut all_move = ActionHistory::with_start(pose(0.0, 0.0));
        all_move.push(AgentAction::Forward, pose(1.0, 0.0));
        all_move.push(AgentAction::Backward, pose(0.0, 0.0));
        assert_eq!(all_move.fallback_action(), AgentAction::Backward);
    }
}
