//! Frontier exploration for object-goal navigation, guided by directional
//! action scores from a vision-language model (or a built-in stand-in), with
//! a confidence-weighted semantic value map, an action-history loop breaker,
//! and a 2D ray-cast simulator for evaluation.

pub mod explorer;
pub mod frontier;
pub mod history;
pub mod metrics;
pub mod occupancy;
pub mod prompts;
pub mod render;
pub mod runner;
pub mod scorer;
pub mod simworld;
pub mod trace;
pub mod value_map;

pub use explorer::{Explorer, ExplorerConfig, Phase};
pub use frontier::{detect_frontiers, Frontier};
pub use history::{ActionHistory, AgentAction};
pub use metrics::{shortest_path_oracle, spl, success_rate, EpisodeResult};
pub use occupancy::{CellIndex, CellState, DepthScan, GridPose, OccupancyGrid};
pub use prompts::{generate_prompt, parse_response, CoTLevel};
pub use runner::{run_batch, run_episode, BatchOptions, RunnerOptions};
pub use scorer::{Scorer, ScorerError, ScorerRequest, ScorerResponse};
pub use simworld::{apply_action, corridor_world, generate_world, sense, SimParams, World};
pub use value_map::{ActionScores, ConeParams, ValueMap};
