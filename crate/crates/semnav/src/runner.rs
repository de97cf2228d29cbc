//! Drives episodes end to end and aggregates batches. Episodes within a
//! batch are independent, so the batch loop runs data-parallel when the
//! `parallel` feature is on; results are always reduced in episode order so
//! the output is identical either way.

use serde::{Deserialize, Serialize};

use crate::explorer::{Explorer, ExplorerConfig, Phase};
use crate::metrics::{shortest_path_oracle, spl, success_rate, EpisodeResult};
use crate::render::trajectory_render;
use crate::scorer::Scorer;
use crate::simworld::{apply_action, sense, SimParams, World};
use crate::trace::{TraceRecord, TraceWriter};

#[derive(Debug, Clone, Default)]
pub struct RunnerOptions {
    pub record_trace: bool,
    pub keep_maps: bool,
}

/// Per-episode side outputs; empty unless requested via `RunnerOptions`.
#[derive(Debug, Clone, Default)]
pub struct EpisodeArtifacts {
    pub trace_jsonl: Option<Vec<u8>>,
    pub occupancy_pgm: Option<Vec<u8>>,
    pub values_pgm: Option<Vec<u8>>,
    pub confidences_pgm: Option<Vec<u8>>,
    pub trajectory_ppm: Option<Vec<u8>>,
}

/// Run one episode to completion (success, failure, or step budget).
pub fn run_episode(
    world: &World,
    scorer: &dyn Scorer,
    config: &ExplorerConfig,
    sim: &SimParams,
    episode: usize,
    seed: u64,
    opts: &RunnerOptions,
) -> (EpisodeResult, EpisodeArtifacts) {
    let mut pose = world.start;
    let success_radius_cells = config.success_radius_m / sim.resolution;
    let degenerate = world.nearest_target(&pose).1 <= success_radius_cells;
    let shortest_path_m =
        shortest_path_oracle(world, &pose, config.success_radius_m, sim.resolution).unwrap_or(0.0);

    let mut explorer = Explorer::new(
        config.clone(),
        *sim,
        world.width(),
        world.height(),
        pose,
    );
    let mut trace = opts.record_trace.then(|| TraceWriter::new(Vec::new()));
    if let Some(t) = trace.as_mut() {
        t.write(&TraceRecord::Header {
            episode,
            seed,
            target_category: config.target_category.clone(),
            world_width: world.width(),
            world_height: world.height(),
            start: (pose.x, pose.y, pose.heading),
            scorer: scorer.name().to_string(),
        })
        .expect("in-memory trace write cannot fail");
    }

    let mut path_length_m = 0.0;
    let mut trajectory = vec![pose];
    if !degenerate {
        while !explorer.phase().is_done() {
            let obs = sense(world, &pose, sim);
            let outcome = explorer.step(&pose, &obs, scorer);
            let (new_pose, moved) = if outcome.phase.is_done() {
                (pose, false)
            } else {
                apply_action(world, &pose, outcome.action, sim)
            };
            explorer.after_step(outcome.action, new_pose);
            if let Some(t) = trace.as_mut() {
                t.write(&TraceRecord::Step {
                    step: explorer.steps_taken(),
                    pose: (new_pose.x, new_pose.y, new_pose.heading),
                    action: outcome.action,
                    phase: outcome.phase,
                    frontier_count: outcome.frontier_count,
                    waypoint: outcome.waypoint,
                    scores: outcome.scores,
                    stagnation: outcome.stagnation,
                    scorer_fallback: outcome.scorer_fallback,
                    moved,
                })
                .expect("in-memory trace write cannot fail");
            }
            path_length_m += pose.distance_to(&new_pose) * sim.resolution;
            pose = new_pose;
            trajectory.push(pose);
        }
    }

    // An episode counts as a success only if the agent both declared success
    // and is actually within the radius of a true target.
    let truly_close = world.nearest_target(&pose).1 <= success_radius_cells;
    let success = if degenerate {
        true
    } else {
        explorer.phase() == Phase::DoneSuccess && truly_close
    };

    let mut artifacts = EpisodeArtifacts::default();
    if opts.keep_maps {
        artifacts.occupancy_pgm = Some(explorer.grid.to_pgm());
        artifacts.values_pgm = Some(explorer.value_map.values_pgm());
        artifacts.confidences_pgm = Some(explorer.value_map.confidences_pgm());
        artifacts.trajectory_ppm =
            Some(trajectory_render(&explorer.grid, &trajectory, &world.targets).to_ppm());
    }
    if let Some(mut t) = trace {
        if opts.keep_maps {
            t.write(&TraceRecord::FinalMaps {
                occupancy_pgm: format!("ep{episode:03}_occupancy.pgm"),
                values_pgm: format!("ep{episode:03}_values.pgm"),
                confidences_pgm: format!("ep{episode:03}_confidences.pgm"),
                trajectory_ppm: format!("ep{episode:03}_trajectory.ppm"),
            })
            .expect("in-memory trace write cannot fail");
        }
        artifacts.trace_jsonl = Some(t.into_inner());
    }

    let result = EpisodeResult {
        episode,
        seed,
        success,
        steps: explorer.steps_taken(),
        path_length_m,
        shortest_path_m,
        degenerate,
        scorer_fallbacks: explorer.scorer_fallbacks,
        scorer_queries: explorer.scorer_queries,
    };
    (result, artifacts)
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    /// Worker threads for the episode loop. `None` uses the rayon default;
    /// ignored when built without the `parallel` feature.
    pub threads: Option<usize>,
    pub runner: RunnerOptions,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { threads: None, runner: RunnerOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scorer: String,
    pub episodes: usize,
    pub base_seed: u64,
    pub success_rate: f64,
    pub spl: f64,
    pub degenerate_episodes: usize,
    pub total_steps: usize,
    pub scorer_queries: usize,
    pub scorer_fallbacks: usize,
    pub results: Vec<EpisodeResult>,
}

impl BatchSummary {
    /// Deterministic serialization: struct field order, no timestamps.
    pub fn to_metrics_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub struct BatchOutput {
    pub summary: BatchSummary,
    pub artifacts: Vec<EpisodeArtifacts>,
}

fn episode_body<W, S>(
    i: usize,
    base_seed: u64,
    world_factory: &W,
    scorer_factory: &S,
    config: &ExplorerConfig,
    sim: &SimParams,
    opts: &BatchOptions,
) -> (EpisodeResult, EpisodeArtifacts)
where
    W: Fn(usize, u64) -> World + Sync,
    S: Fn(usize) -> Box<dyn Scorer> + Sync,
{
    let seed = base_seed.wrapping_add(i as u64);
    let world = world_factory(i, seed);
    let scorer = scorer_factory(i);
    run_episode(&world, scorer.as_ref(), config, sim, i, seed, &opts.runner)
}

/// Run `episodes` independent episodes; episode `i` gets seed
/// `base_seed + i`. Output order is always episode order.
pub fn run_batch<W, S>(
    episodes: usize,
    base_seed: u64,
    world_factory: W,
    scorer_factory: S,
    config: &ExplorerConfig,
    sim: &SimParams,
    opts: &BatchOptions,
) -> BatchOutput
where
    W: Fn(usize, u64) -> World + Sync,
    S: Fn(usize) -> Box<dyn Scorer> + Sync,
{
    #[cfg(feature = "parallel")]
    let pairs: Vec<(EpisodeResult, EpisodeArtifacts)> = {
        use rayon::prelude::*;
        let run = || {
            (0..episodes)
                .into_par_iter()
                .map(|i| episode_body(i, base_seed, &world_factory, &scorer_factory, config, sim, opts))
                .collect()
        };
        match opts.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool builds")
                .install(run),
            None => run(),
        }
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<(EpisodeResult, EpisodeArtifacts)> = (0..episodes)
        .map(|i| episode_body(i, base_seed, &world_factory, &scorer_factory, config, sim, opts))
        .collect();

    let (results, artifacts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let summary = BatchSummary {
        scorer: scorer_factory(0).name().to_string(),
        episodes,
        base_seed,
        success_rate: success_rate(&results),
        spl: spl(&results),
        degenerate_episodes: results.iter().filter(|r| r.degenerate).count(),
        total_steps: results.iter().map(|r| r.steps).sum(),
        scorer_queries: results.iter().map(|r| r.scorer_queries).sum(),
        scorer_fallbacks: results.iter().map(|r| r.scorer_fallbacks).sum(),
        results,
    };
    BatchOutput { summary, artifacts }
}

/// Translation distance (meters) the shortest-step policy would need; used
/// by tests to sanity-check path accounting.
pub fn ideal_step_count(shortest_path_m: f64, sim: &SimParams) -> usize {
    (shortest_path_m / sim.step_m).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::OracleScorer;
    use crate::simworld::generate_world;
    use crate::value_map::ConeParams;
    use std::sync::Arc;

    fn test_config() -> ExplorerConfig {
        ExplorerConfig { target_category: "tv".into(), ..ExplorerConfig::default() }
    }

    #[test]
    fn oracle_succeeds_on_a_generated_world() {
        let sim = SimParams::default();
        let world = generate_world(7, 4, 64, 64);
        let scorer = OracleScorer::new(Arc::new(world.clone()), ConeParams::default());
        let (result, _) = run_episode(
            &world,
            &scorer,
            &test_config(),
            &sim,
            0,
            7,
            &RunnerOptions::default(),
        );
        assert!(result.success, "oracle-guided episode failed after {} steps", result.steps);
        assert!(result.path_length_m > 0.0 || result.degenerate);
    }

    #[test]
    fn batch_is_deterministic_and_ordered() {
        let sim = SimParams::default();
        let config = test_config();
        let make = |threads| {
            run_batch(
                3,
                100,
                |_i, seed| generate_world(seed, 4, 64, 64),
                |i| -> Box<dyn Scorer> {
                    let seed = 100u64.wrapping_add(i as u64);
                    Box::new(OracleScorer::new(
                        Arc::new(generate_world(seed, 4, 64, 64)),
                        ConeParams::default(),
                    ))
                },
                &config,
                &sim,
                &BatchOptions { threads, ..BatchOptions::default() },
            )
            .summary
            .to_metrics_json()
        };
        let a = make(Some(1));
        let b = make(Some(4));
        assert_eq!(a, b, "metrics must not depend on parallelism");
        let again = make(Some(1));
        assert_eq!(a, again, "metrics must be identical across reruns");
    }
}
