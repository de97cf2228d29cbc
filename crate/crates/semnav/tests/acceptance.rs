//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single PASS/FAIL line (visible with `--nocapture`; a FAIL also
//! fails the test).

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semnav::explorer::ExplorerConfig;
use semnav::frontier::detect_frontiers;
use semnav::history::AgentAction;
use semnav::metrics::EpisodeResult;
use semnav::occupancy::{CellIndex, CellState, OccupancyGrid};
use semnav::prompts::{
    generate_prompt, parse_response, render_response, CoTLevel, PromptRequest,
};
use semnav::runner::{run_batch, run_episode, BatchOptions, RunnerOptions};
use semnav::scorer::stub::{StubBehavior, StubVlmServer};
use semnav::scorer::{
    OracleScorer, OscillatingScorer, RemoteConfig, RemoteScorer, Scorer, UniformScorer,
};
use semnav::simworld::{corridor_world, generate_world, SimParams};
use semnav::value_map::{fuse_pair, viewing_confidence, ActionScores, ConeParams};
use semnav::{spl, success_rate};

fn report<F: FnOnce() -> Result<(), String>>(name: &str, f: F) {
    match f() {
        Ok(()) => println!("[acceptance] {name}: PASS"),
        Err(e) => {
            println!("[acceptance] {name}: FAIL ({e})");
            panic!("{name}: {e}");
        }
    }
}

fn approx(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b} (tol {tol})"))
    }
}

#[test]
fn criterion_01_confidence_cone_closed_form() {
    report("01 confidence cone matches closed form", || {
        let p = ConeParams::default();
        let half = p.theta_fov / 2.0;
        approx(viewing_confidence(0.0, 0.0, &p), 1.0, 1e-12, "origin")?;
        approx(
            viewing_confidence(10.0, 0.0, &p),
            (-0.5_f64).exp(),
            1e-12,
            "on-axis decay at d=10",
        )?;
        approx(
            viewing_confidence(0.0, half / 2.0, &p),
            0.5,
            1e-12,
            "half cone angle",
        )?;
        approx(viewing_confidence(0.0, half, &p), 0.0, 1e-12, "cone edge")?;
        approx(viewing_confidence(5.0, half * 1.01, &p), 0.0, 1e-12, "outside cone")?;
        approx(
            viewing_confidence(20.0, half / 2.0, &p),
            (-1.0_f64).exp() * 0.5,
            1e-12,
            "combined decay and angle",
        )?;
        // Symmetry in theta for a sweep of points.
        for i in 0..100 {
            let d = i as f64 * 0.5;
            let th = (i as f64 / 100.0) * half;
            approx(
                viewing_confidence(d, th, &p),
                viewing_confidence(d, -th, &p),
                1e-12,
                "angular symmetry",
            )?;
        }
        Ok(())
    });
}

#[test]
fn criterion_02_fusion_update() {
    report("02 fusion worked examples and random bounds", || {
        let eps = 1e-6;
        // Fresh cell: prior (0.5, 0) plus observation (0.9, 0.8) keeps the
        // observed value. Exact algebra at 1e-9 with the regularizer
        // included, plus a looser check that the regularizer error is
        // epsilon-scale.
        let (v, c) = fuse_pair(0.9, 0.8, 0.5, 0.0);
        approx(v, 0.72 / (0.8 + eps), 1e-9, "fresh cell value")?;
        approx(c, 0.64 / (0.8 + eps), 1e-9, "fresh cell confidence")?;
        approx(v, 0.9, 1e-5, "fresh cell value (ideal)")?;
        approx(c, 0.8, 1e-5, "fresh cell confidence (ideal)")?;
        // Equal confidences average the values.
        let (v, c) = fuse_pair(0.9, 0.5, 0.3, 0.5);
        approx(v, 0.6 / (1.0 + eps), 1e-9, "symmetric value")?;
        approx(c, 0.5 / (1.0 + eps), 1e-9, "symmetric confidence")?;
        approx(v, 0.6, 1e-5, "symmetric value (ideal)")?;
        // Asymmetric confidences weight the newer, stronger reading.
        let (v, c) = fuse_pair(1.0, 0.8, 0.5, 0.2);
        approx(v, 0.9 / (1.0 + eps), 1e-9, "weighted value")?;
        approx(c, 0.68 / (1.0 + eps), 1e-9, "weighted confidence")?;
        approx(v, 0.9, 1e-5, "weighted value (ideal)")?;
        approx(c, 0.68, 1e-5, "weighted confidence (ideal)")?;

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..100_000 {
            let (v1, c1) = (rng.gen::<f64>(), rng.gen::<f64>());
            let (v2, c2) = (rng.gen::<f64>(), rng.gen::<f64>());
            let (v, c) = fuse_pair(v1, c1, v2, c2);
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("tuple {i}: fused value {v} out of [0,1]"));
            }
            if c < 0.0 || c > c1.max(c2) + 1e-12 {
                return Err(format!("tuple {i}: fused confidence {c} exceeds max({c1},{c2})"));
            }
            // Value stays within the convex hull of the inputs (up to the
            // epsilon shrink toward zero).
            if v > v1.max(v2) + 1e-9 {
                return Err(format!("tuple {i}: fused value {v} above both inputs"));
            }
        }
        Ok(())
    });
}

/// Definition-level frontier oracle: per-cell predicate plus union-find
/// grouping, structured independently of the production BFS.
fn brute_force_frontiers(grid: &OccupancyGrid) -> BTreeSet<(CellIndex, Vec<CellIndex>)> {
    let w = grid.width() as i32;
    let h = grid.height() as i32;
    let idx = |c: CellIndex| (c.1 * w + c.0) as usize;
    let mut frontier = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if grid.state((x, y)) != CellState::Free {
                continue;
            }
            frontier[idx((x, y))] = [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
                .iter()
                .any(|&n| grid.in_bounds(n) && grid.state(n) == CellState::Unknown);
        }
    }
    let mut parent: Vec<usize> = (0..(w * h) as usize).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for y in 0..h {
        for x in 0..w {
            if !frontier[idx((x, y))] {
                continue;
            }
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let n = (x + dx, y + dy);
                    if (dx != 0 || dy != 0) && grid.in_bounds(n) && frontier[idx(n)] {
                        let a = find(&mut parent, idx((x, y)));
                        let b = find(&mut parent, idx(n));
                        parent[a] = b;
                    }
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<CellIndex>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            if frontier[idx((x, y))] {
                let root = find(&mut parent, idx((x, y)));
                groups.entry(root).or_default().push((x, y));
            }
        }
    }
    groups
        .into_values()
        .map(|mut cells| {
            cells.sort_unstable();
            let n = cells.len() as f64;
            let cx = cells.iter().map(|c| c.0 as f64).sum::<f64>() / n;
            let cy = cells.iter().map(|c| c.1 as f64).sum::<f64>() / n;
            let mid = *cells
                .iter()
                .min_by(|a, b| {
                    let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                    let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                    da.partial_cmp(&db).unwrap().then_with(|| (a.1, a.0).cmp(&(b.1, b.0)))
                })
                .unwrap();
            (mid, cells)
        })
        .collect()
}

#[test]
fn criterion_03_frontier_oracle_equivalence() {
    report("03 frontier detection matches brute-force oracle", || {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut grid = OccupancyGrid::new(64, 64, 1.0);
            for y in 0..64 {
                for x in 0..64 {
                    match rng.gen_range(0..10) {
                        0..=3 => grid.mark_free((x, y)),
                        4..=5 => grid.mark_obstacle((x, y)),
                        _ => {}
                    }
                }
            }
            let got: BTreeSet<(CellIndex, Vec<CellIndex>)> = detect_frontiers(&grid, 1)
                .into_iter()
                .map(|f| {
                    let mut cells = f.cells;
                    cells.sort_unstable();
                    (f.midpoint, cells)
                })
                .collect();
            let expected = brute_force_frontiers(&grid);
            if got != expected {
                return Err(format!(
                    "seed {seed}: {} components detected vs {} expected",
                    got.len(),
                    expected.len()
                ));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_04_spl_and_sr_identities() {
    report("04 SPL and SR identities", || {
        let ep = |success: bool, p: f64, l: f64, degenerate: bool| EpisodeResult {
            episode: 0,
            seed: 0,
            success,
            steps: 1,
            path_length_m: p,
            shortest_path_m: l,
            degenerate,
            scorer_fallbacks: 0,
            scorer_queries: 1,
        };
        approx(spl(&[ep(true, 4.0, 4.0, false)]), 1.0, 1e-12, "optimal path")?;
        approx(spl(&[ep(false, 4.0, 4.0, false)]), 0.0, 1e-12, "failure")?;
        approx(spl(&[ep(true, 8.0, 4.0, false)]), 0.5, 1e-12, "double-length path")?;
        approx(spl(&[ep(true, 2.0, 4.0, false)]), 1.0, 1e-12, "max(p,l) clamp")?;
        approx(
            spl(&[ep(true, 4.0, 4.0, false), ep(false, 1.0, 1.0, false)]),
            0.5,
            1e-12,
            "mean over episodes",
        )?;
        approx(
            success_rate(&[ep(true, 1.0, 1.0, false), ep(false, 1.0, 1.0, false)]),
            0.5,
            1e-12,
            "success rate",
        )?;
        // Degenerate episodes are excluded from both aggregates.
        approx(
            spl(&[ep(true, 0.0, 0.0, true), ep(true, 8.0, 4.0, false)]),
            0.5,
            1e-12,
            "degenerate exclusion",
        )?;
        // Permutation invariance.
        let mut set = vec![
            ep(true, 5.0, 4.0, false),
            ep(false, 2.0, 2.0, false),
            ep(true, 9.0, 3.0, false),
        ];
        let a = (spl(&set), success_rate(&set));
        set.rotate_left(1);
        let b = (spl(&set), success_rate(&set));
        if a != b {
            return Err("aggregates changed under permutation".to_string());
        }
        Ok(())
    });
}

#[test]
fn criterion_05_prompts_and_parsing() {
    report("05 prompt rendering and reply parsing", || {
        // Byte-exact rendering against the frozen templates.
        for level in CoTLevel::ALL {
            let prompt = generate_prompt(&PromptRequest {
                level,
                target_category: "tv".into(),
                history_rendering: String::new(),
            })
            .map_err(|e| e.to_string())?;
            let expected = level.template().replace("[TARGET_OBJECT]", "tv").replace("[HISTORY]\n", "");
            if prompt != expected {
                return Err(format!("{} prompt differs from template", level.name()));
            }
            if prompt.contains("[TARGET_OBJECT]") || prompt.contains("[HISTORY]") {
                return Err(format!("{} prompt left a placeholder behind", level.name()));
            }
        }
        let basic = generate_prompt(&PromptRequest {
            level: CoTLevel::NoCoT,
            target_category: "tv".into(),
            history_rendering: String::new(),
        })
        .unwrap();
        if !basic.starts_with("Robot's Goal: Find the tv.") {
            return Err("minimal prompt opening line changed".into());
        }

        // Compact score line.
        let parsed = parse_response("F: 0.9, B: 0.1, L: 0.0, R: 0.0").map_err(|e| e.to_string())?;
        approx(parsed.scores.forward, 0.9, 1e-12, "compact F")?;
        approx(parsed.scores.backward, 0.1, 1e-12, "compact B")?;
        approx(parsed.scores.left, 0.0, 1e-12, "compact L")?;
        approx(parsed.scores.right, 0.0, 1e-12, "compact R")?;

        // Round-trip fuzz: render a structured reply, parse it back.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actions = [
            AgentAction::Forward,
            AgentAction::Backward,
            AgentAction::TurnLeft,
            AgentAction::TurnRight,
        ];
        for i in 0..10_000 {
            let scores = ActionScores::new(
                (rng.gen::<f64>() * 100.0).round() / 100.0,
                (rng.gen::<f64>() * 100.0).round() / 100.0,
                (rng.gen::<f64>() * 100.0).round() / 100.0,
                (rng.gen::<f64>() * 100.0).round() / 100.0,
            );
            let found = rng.gen::<bool>();
            let action = actions[rng.gen_range(0..actions.len())];
            let text = render_response(&scores, "tv", found, "living room", action, "fuzz");
            let parsed = parse_response(&text).map_err(|e| format!("round {i}: {e}"))?;
            approx(parsed.scores.forward, scores.forward, 1e-9, "rt forward")?;
            approx(parsed.scores.backward, scores.backward, 1e-9, "rt backward")?;
            approx(parsed.scores.left, scores.left, 1e-9, "rt left")?;
            approx(parsed.scores.right, scores.right, 1e-9, "rt right")?;
            if parsed.target_found != found {
                return Err(format!("round {i}: target flag lost"));
            }
            if parsed.recommended_action != Some(action) {
                return Err(format!("round {i}: recommended action lost"));
            }
            // Arbitrary garbage must never panic.
            let junk: String = (0..rng.gen_range(0..64))
                .map(|_| rng.gen_range(b' '..b'~') as char)
                .collect();
            let _ = parse_response(&junk);
        }
        Ok(())
    });
}

#[test]
fn criterion_06_corridor_loop_breaking() {
    report("06 history breaks adversarial oscillation in corridors", || {
        let sim = SimParams::default();
        for seed in 1..=10u64 {
            let world = corridor_world(seed);
            for use_history in [true, false] {
                let config = ExplorerConfig {
                    target_category: "tv".into(),
                    use_history,
                    ..ExplorerConfig::default()
                };
                let scorer = OscillatingScorer::new(0);
                let (result, _) = run_episode(
                    &world,
                    &scorer,
                    &config,
                    &sim,
                    0,
                    seed,
                    &RunnerOptions::default(),
                );
                if use_history && !result.success {
                    return Err(format!(
                        "seed {seed}: with history the agent failed after {} steps",
                        result.steps
                    ));
                }
                if !use_history && result.success {
                    return Err(format!(
                        "seed {seed}: without history the agent unexpectedly escaped the loop"
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_07_oracle_batch_quality() {
    report("07 oracle batch: SR 1.0, SPL >= 0.6, uniform strictly lower, < 2 min", || {
        let start = Instant::now();
        let sim = SimParams::default();
        let config = ExplorerConfig { target_category: "tv".into(), ..ExplorerConfig::default() };
        let oracle = run_batch(
            50,
            1,
            |_i, seed| generate_world(seed, 4, 64, 64),
            |i| -> Box<dyn Scorer> {
                Box::new(OracleScorer::new(
                    Arc::new(generate_world(1 + i as u64, 4, 64, 64)),
                    ConeParams::default(),
                ))
            },
            &config,
            &sim,
            &BatchOptions::default(),
        );
        let s = &oracle.summary;
        if s.success_rate < 1.0 {
            let failed: Vec<usize> = s
                .results
                .iter()
                .filter(|r| !r.success && !r.degenerate)
                .map(|r| r.episode)
                .collect();
            return Err(format!("oracle SR {} (failed episodes {failed:?})", s.success_rate));
        }
        if s.spl < 0.6 {
            return Err(format!("oracle SPL {} below 0.6", s.spl));
        }
        // The uniform baseline never claims the target, so it can't succeed;
        // a short step budget is enough to establish its (zero) SPL.
        let mut uniform_config = config.clone();
        uniform_config.max_steps = 60;
        let uniform = run_batch(
            50,
            1,
            |_i, seed| generate_world(seed, 4, 64, 64),
            |_i| -> Box<dyn Scorer> { Box::new(UniformScorer) },
            &uniform_config,
            &sim,
            &BatchOptions::default(),
        );
        if uniform.summary.spl >= s.spl {
            return Err(format!(
                "uniform SPL {} not strictly below oracle {}",
                uniform.summary.spl, s.spl
            ));
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() > 120.0 {
            return Err(format!("batch took {:.1}s (budget 120s)", elapsed.as_secs_f64()));
        }
        Ok(())
    });
}

#[test]
fn criterion_08_deterministic_metrics() {
    report("08 metrics are byte-identical across reruns and thread counts", || {
        let sim = SimParams::default();
        let config = ExplorerConfig { target_category: "tv".into(), ..ExplorerConfig::default() };
        let make = |threads: Option<usize>| {
            run_batch(
                6,
                11,
                |_i, seed| generate_world(seed, 4, 64, 64),
                |i| -> Box<dyn Scorer> {
                    Box::new(OracleScorer::new(
                        Arc::new(generate_world(11 + i as u64, 4, 64, 64)),
                        ConeParams::default(),
                    ))
                },
                &config,
                &sim,
                &BatchOptions {
                    threads,
                    runner: RunnerOptions::default(),
                },
            )
            .summary
            .to_metrics_json()
        };
        let single = make(Some(1));
        let rerun = make(Some(1));
        if single != rerun {
            return Err("rerun with identical settings changed metrics.json".into());
        }
        let eight = make(Some(8));
        if single != eight {
            return Err("thread count changed metrics.json".into());
        }
        Ok(())
    });
}

#[test]
fn criterion_09_remote_scorer_fallbacks() {
    report("09 remote scorer: live stub has zero fallbacks, dead endpoint all fallbacks", || {
        let sim = SimParams::default();
        let config = ExplorerConfig {
            target_category: "tv".into(),
            max_steps: 20,
            ..ExplorerConfig::default()
        };
        // Live stub replaying a well-formed reply: every query parses.
        let reply = render_response(
            &ActionScores::new(0.8, 0.1, 0.3, 0.2),
            "tv",
            false,
            "corridor",
            AgentAction::Forward,
            "stub reply",
        );
        let server = StubVlmServer::spawn(StubBehavior::ReplayContent(reply))
            .map_err(|e| format!("stub spawn: {e}"))?;
        let endpoint = server.endpoint();
        let live = run_batch(
            5,
            3,
            |_i, seed| generate_world(seed, 4, 64, 64),
            |_i| -> Box<dyn Scorer> {
                Box::new(RemoteScorer::new(RemoteConfig {
                    endpoint: endpoint.clone(),
                    timeout_secs: 10,
                    ..RemoteConfig::default()
                }))
            },
            &config,
            &sim,
            &BatchOptions { threads: Some(1), runner: RunnerOptions::default() },
        );
        let s = live.summary;
        if s.scorer_queries == 0 {
            return Err("live run issued no scorer queries".into());
        }
        if s.scorer_fallbacks != 0 {
            return Err(format!(
                "live stub run had {} fallbacks over {} queries",
                s.scorer_fallbacks, s.scorer_queries
            ));
        }
        drop(server);

        // Dead endpoint: every query errors and falls back, with a warning
        // logged per fallback.
        let dead = run_batch(
            5,
            3,
            |_i, seed| generate_world(seed, 4, 64, 64),
            |_i| -> Box<dyn Scorer> {
                Box::new(RemoteScorer::new(RemoteConfig {
                    endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
                    timeout_secs: 1,
                    ..RemoteConfig::default()
                }))
            },
            &config,
            &sim,
            &BatchOptions { threads: Some(1), runner: RunnerOptions::default() },
        );
        let s = dead.summary;
        if s.scorer_queries == 0 || s.scorer_fallbacks != s.scorer_queries {
            return Err(format!(
                "dead endpoint: {} fallbacks over {} queries (expected 100%)",
                s.scorer_fallbacks, s.scorer_queries
            ));
        }
        Ok(())
    });
}
