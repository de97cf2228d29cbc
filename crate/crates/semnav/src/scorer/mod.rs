//! Pluggable semantic scoring behind one interface: a ground-truth oracle, a
//! free-space heuristic, a uniform baseline, an adversarial oscillator for
//! loop-breaking tests, and a remote HTTP client to a vision-chat endpoint.

mod remote;
pub mod stub;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

pub use remote::{RemoteConfig, RemoteScorer};

use crate::occupancy::{line_of_sight, normalize_angle, GridPose};
use crate::render::ImageRgb;
use crate::simworld::World;
use crate::value_map::{ActionScores, ConeParams};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {0}")]
    Http(u16),
    #[error("response parse failure: {0}")]
    Parse(String),
}

/// Wire-level scoring request: both renders plus the generated prompt.
#[derive(Debug, Clone)]
pub struct ScorerRequest {
    pub egocentric_render: ImageRgb,
    pub topdown_render: ImageRgb,
    pub prompt: String,
    pub target_category: String,
}

/// In-process context the built-in scorers draw on; never leaves the process.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext {
    pub pose: GridPose,
    /// Free-space depth (cells) in the forward/backward/left/right sectors of
    /// the agent's current occupancy knowledge.
    pub sector_depths: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct ScorerResponse {
    pub scores: ActionScores,
    pub target_found: bool,
    pub reasoning: String,
    pub room_label: Option<String>,
}

pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScorerRequest, ctx: &QueryContext) -> Result<ScorerResponse, ScorerError>;
    fn name(&self) -> &'static str;
}

/// Deterministic oracle standing in for the VLM: scores from the ground-truth
/// bearing to the nearest target, detection from range/FOV/line-of-sight.
pub struct OracleScorer {
    world: Arc<World>,
    cone: ConeParams,
}

impl OracleScorer {
    pub fn new(world: Arc<World>, cone: ConeParams) -> Self {
        Self { world, cone }
    }
}

impl Scorer for OracleScorer {
    fn score(&self, _request: &ScorerRequest, ctx: &QueryContext) -> Result<ScorerResponse, ScorerError> {
        let pose = ctx.pose;
        let (target, dist) = self.world.nearest_target(&pose);
        let bearing = normalize_angle(
            (target.1 as f64 + 0.5 - pose.y).atan2(target.0 as f64 + 0.5 - pose.x) - pose.heading,
        );
        // Angular-proximity kernel peaked at the anchor nearest the bearing.
        let kernel = |anchor: f64| normalize_angle(bearing - anchor).cos().max(0.0);
        let scores = ActionScores::new(
            kernel(0.0),
            kernel(std::f64::consts::PI),
            kernel(std::f64::consts::FRAC_PI_2),
            kernel(-std::f64::consts::FRAC_PI_2),
        );
        let in_fov = bearing.abs() <= self.cone.theta_fov / 2.0;
        let visible = in_fov
            && dist <= self.cone.max_range
            && line_of_sight((pose.x, pose.y), target, |c| self.world.is_obstacle(c));
        Ok(ScorerResponse {
            scores,
            target_found: visible,
            reasoning: format!("oracle: target bearing {:.1} deg", bearing.to_degrees()),
            room_label: None,
        })
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}

/// VLM-free baseline: scores proportional to free-space depth per action
/// sector; never claims to have found the target.
pub struct HeuristicScorer {
    max_depth: f64,
}

impl HeuristicScorer {
    pub fn new(max_depth: f64) -> Self {
        Self { max_depth }
    }
}

impl Scorer for HeuristicScorer {
    fn score(&self, _request: &ScorerRequest, ctx: &QueryContext) -> Result<ScorerResponse, ScorerError> {
        let d = ctx.sector_depths;
        let norm = |x: f64| (x / self.max_depth).clamp(0.0, 1.0);
        Ok(ScorerResponse {
            scores: ActionScores::new(norm(d[0]), norm(d[1]), norm(d[2]), norm(d[3])),
            target_found: false,
            reasoning: "heuristic: free-space depth per sector".to_string(),
            room_label: None,
        })
    }

    fn name(&self) -> &'static str {
        "heuristic"
    }
}

/// Constant uniform scores; exercises pure geometric frontier exploration.
pub struct UniformScorer;

impl Scorer for UniformScorer {
    fn score(&self, _request: &ScorerRequest, _ctx: &QueryContext) -> Result<ScorerResponse, ScorerError> {
        Ok(ScorerResponse {
            scores: ActionScores::uniform(),
            target_found: false,
            reasoning: "uniform".to_string(),
            room_label: None,
        })
    }

    fn name(&self) -> &'static str {
        "uniform"
    }
}

/// Adversarial scorer that alternates between a left peak and a right peak
/// on successive calls, so competing side openings flip rank every step and
/// drag the agent into a turn-in-place decision loop at junctions.
/// Always claims the target is found so goal hand-off hinges on the sensor.
pub struct OscillatingScorer {
    calls: AtomicUsize,
}

impl OscillatingScorer {
    pub fn new(phase: usize) -> Self {
        Self {
            calls: AtomicUsize::new(phase),
        }
    }
}

impl Scorer for OscillatingScorer {
    fn score(&self, _request: &ScorerRequest, _ctx: &QueryContext) -> Result<ScorerResponse, ScorerError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let scores = if n % 2 == 0 {
            ActionScores::new(0.0, 0.0, 1.0, 0.0)
        } else {
            ActionScores::new(0.0, 0.0, 0.0, 1.0)
        };
        Ok(ScorerResponse {
            scores,
            target_found: true,
            reasoning: "oscillator".to_string(),
            room_label: None,
        })
    }

    fn name(&self) -> &'static str {
        "oscillating"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ImageRgb;
    use crate::simworld;

    fn dummy_request() -> ScorerRequest {
        ScorerRequest {
            egocentric_render: ImageRgb::filled(4, 4, [0, 0, 0]),
            topdown_render: ImageRgb::filled(4, 4, [0, 0, 0]),
            prompt: "p".to_string(),
            target_category: "tv".to_string(),
        }
    }

    fn ctx(pose: GridPose) -> QueryContext {
        QueryContext {
            pose,
            sector_depths: [0.0; 4],
        }
    }

    #[test]
    fn oracle_peaks_forward_when_target_ahead() {
        let world = Arc::new(simworld::World::from_ascii("######\n#S..T#\n######").unwrap());
        let scorer = OracleScorer::new(world, ConeParams::default());
        let r = scorer.score(&dummy_request(), &ctx(GridPose::new(1.5, 1.5, 0.0))).unwrap();
        assert!((r.scores.forward - 1.0).abs() < 1e-9);
        assert!(r.scores.left.abs() < 1e-9);
        assert!(r.scores.right.abs() < 1e-9);
        assert!(r.scores.backward.abs() < 1e-9);
        assert!(r.target_found);
    }

    #[test]
    fn oracle_picks_left_for_target_at_plus_ninety() {
        // Target due +y of the agent.
        let world = Arc::new(
            simworld::World::from_ascii("#####\n#S..#\n#...#\n#T..#\n#####").unwrap(),
        );
        let scorer = OracleScorer::new(world, ConeParams::default());
        let r = scorer.score(&dummy_request(), &ctx(GridPose::new(1.5, 1.5, 0.0))).unwrap();
        assert!(r.scores.left > r.scores.forward);
        assert!(r.scores.left > r.scores.right);
        assert!(r.scores.left > r.scores.backward);
    }

    #[test]
    fn oracle_hides_target_behind_wall_but_still_points_at_it() {
        let world = Arc::new(simworld::World::from_ascii("#######\n#S.#.T#\n#######").unwrap());
        let scorer = OracleScorer::new(world, ConeParams::default());
        let r = scorer.score(&dummy_request(), &ctx(GridPose::new(1.5, 1.5, 0.0))).unwrap();
        assert!(!r.target_found);
        assert!(r.scores.forward > r.scores.left);
        assert!(r.scores.forward > r.scores.backward);
    }

    #[test]
    fn heuristic_prefers_open_sectors() {
        let scorer = HeuristicScorer::new(10.0);
        let r = scorer
            .score(
                &dummy_request(),
                &QueryContext {
                    pose: GridPose::new(0.0, 0.0, 0.0),
                    sector_depths: [10.0, 2.0, 1.0, 1.0],
                },
            )
            .unwrap();
        assert!(r.scores.forward > r.scores.backward);
        assert!(!r.target_found);

        // Dead-end ahead, open behind.
        let r = scorer
            .score(
                &dummy_request(),
                &QueryContext {
                    pose: GridPose::new(0.0, 0.0, 0.0),
                    sector_depths: [1.0, 9.0, 2.0, 2.0],
                },
            )
            .unwrap();
        assert!(r.scores.backward > r.scores.forward);
    }

    #[test]
    fn oscillator_alternates() {
        let s = OscillatingScorer::new(0);
        let a = s.score(&dummy_request(), &ctx(GridPose::new(0.0, 0.0, 0.0))).unwrap();
        let b = s.score(&dummy_request(), &ctx(GridPose::new(0.0, 0.0, 0.0))).unwrap();
        assert!(a.scores.left > a.scores.right);
        assert!(b.scores.right > b.scores.left);
    }
}
