use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use semnav::explorer::ExplorerConfig;
use semnav::prompts::CoTLevel;
use semnav::render::topdown_render;
use semnav::runner::{run_batch, BatchOptions, BatchOutput, RunnerOptions};
use semnav::scorer::{
    HeuristicScorer, OracleScorer, OscillatingScorer, RemoteConfig, RemoteScorer, Scorer,
    UniformScorer,
};
use semnav::simworld::{corridor_world, generate_world, SimParams, World};
use semnav::occupancy::{GridPose, OccupancyGrid};

#[derive(Parser)]
#[command(name = "semnav", about = "Frontier exploration with scored action directions", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of navigation episodes and write metrics.
    Run(RunArgs),
    /// Run the prompt/history ablation grid and print a table.
    Ablate(AblateArgs),
    /// Generate a world and write its ASCII layout and a ground-truth image.
    Render(RenderArgs),
    /// Check an ASCII world file for structural problems.
    ValidateWorld { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ScorerKind {
    Oracle,
    Heuristic,
    Uniform,
    Oscillating,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WorldKind {
    Rooms,
    Corridor,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, value_enum)]
    scorer: Option<ScorerKind>,
    /// Chat-completions endpoint for --scorer remote.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, value_enum)]
    world: Option<WorldKind>,
    #[arg(long)]
    rooms: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    target: Option<String>,
    /// Prompt detail level: none, basic, intermediate, full.
    #[arg(long)]
    cot: Option<CoTLevel>,
    /// Disable action history (prompt context and loop-breaking fallback).
    #[arg(long)]
    no_history: bool,
    /// Send a blank map image instead of the explored top-down map.
    #[arg(long)]
    no_topdown: bool,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write per-episode JSONL traces and final map images.
    #[arg(long)]
    artifacts: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug, Clone)]
struct AblateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long, value_enum, default_value = "oracle")]
    scorer: ScorerKind,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct RenderArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "rooms")]
    world: WorldKind,
    #[arg(long, default_value_t = 4)]
    rooms: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// The full effective run configuration, serializable so runs can be
/// reproduced from the file alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    seed: u64,
    episodes: usize,
    scorer: ScorerKind,
    endpoint: Option<String>,
    world: WorldKind,
    rooms: usize,
    width: usize,
    height: usize,
    explorer: ExplorerConfig,
    sim: SimParams,
    threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            episodes: 10,
            scorer: ScorerKind::Oracle,
            endpoint: None,
            world: WorldKind::Rooms,
            rooms: 4,
            width: 64,
            height: 64,
            explorer: ExplorerConfig::default(),
            sim: SimParams::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.episodes {
            cfg.episodes = v;
        }
        if let Some(v) = args.scorer {
            cfg.scorer = v;
        }
        if let Some(v) = &args.endpoint {
            cfg.endpoint = Some(v.clone());
        }
        if let Some(v) = args.world {
            cfg.world = v;
        }
        if let Some(v) = args.rooms {
            cfg.rooms = v;
        }
        if let Some(v) = args.width {
            cfg.width = v;
        }
        if let Some(v) = args.height {
            cfg.height = v;
        }
        if let Some(v) = &args.target {
            cfg.explorer.target_category = v.clone();
        }
        if let Some(v) = args.cot {
            cfg.explorer.cot_level = v;
        }
        if args.no_history {
            cfg.explorer.use_history = false;
        }
        if args.no_topdown {
            cfg.explorer.use_topdown_map = false;
        }
        if let Some(v) = args.max_steps {
            cfg.explorer.max_steps = v;
        }
        if let Some(v) = args.threads {
            cfg.threads = Some(v);
        }
        if cfg.explorer.target_category.trim().is_empty() {
            bail!("target category must not be empty");
        }
        Ok(cfg)
    }

    fn make_world(&self, _episode: usize, seed: u64) -> World {
        match self.world {
            WorldKind::Rooms => generate_world(seed, self.rooms, self.width, self.height),
            WorldKind::Corridor => corridor_world(seed),
        }
    }

    fn make_scorer(&self, episode: usize) -> Box<dyn Scorer> {
        let seed = self.seed.wrapping_add(episode as u64);
        match self.scorer {
            ScorerKind::Oracle => Box::new(OracleScorer::new(
                Arc::new(self.make_world(episode, seed)),
                self.explorer.cone,
            )),
            ScorerKind::Heuristic => Box::new(HeuristicScorer::new(self.explorer.cone.max_range)),
            ScorerKind::Uniform => Box::new(UniformScorer),
            ScorerKind::Oscillating => Box::new(OscillatingScorer::new(0)),
            ScorerKind::Remote => {
                let mut rc = RemoteConfig::default();
                if let Some(e) = &self.endpoint {
                    rc.endpoint = e.clone();
                }
                Box::new(RemoteScorer::new(rc))
            }
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Render(args) => cmd_render(args),
        Command::ValidateWorld { path } => cmd_validate(&path),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = RunConfig::from_args(&args)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let output = execute(&cfg, args.artifacts)?;
    write_outputs(&args.out, &cfg, &output, args.artifacts)?;
    println!("{}", summary_table(&[(label_for(&cfg), &output)]));
    println!("wrote {}", args.out.join("metrics.json").display());
    Ok(())
}

fn execute(cfg: &RunConfig, artifacts: bool) -> Result<BatchOutput> {
    let opts = BatchOptions {
        threads: cfg.threads,
        runner: RunnerOptions { record_trace: artifacts, keep_maps: artifacts },
    };
    Ok(run_batch(
        cfg.episodes,
        cfg.seed,
        |i, seed| cfg.make_world(i, seed),
        |i| cfg.make_scorer(i),
        &cfg.explorer,
        &cfg.sim,
        &opts,
    ))
}

fn label_for(cfg: &RunConfig) -> String {
    format!(
        "{:?}/{} hist={} map={}",
        cfg.scorer,
        cfg.explorer.cot_level.name(),
        cfg.explorer.use_history,
        cfg.explorer.use_topdown_map
    )
    .to_lowercase()
}

fn summary_table(rows: &[(String, &BatchOutput)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<40} {:>8} {:>8} {:>8} {:>10} {:>10}\n",
        "configuration", "episodes", "sr", "spl", "steps", "fallbacks"
    ));
    for (label, o) in rows {
        let s = &o.summary;
        out.push_str(&format!(
            "{:<40} {:>8} {:>8.3} {:>8.3} {:>10} {:>10}\n",
            label, s.episodes, s.success_rate, s.spl, s.total_steps, s.scorer_fallbacks
        ));
    }
    out
}

fn write_outputs(out_dir: &Path, cfg: &RunConfig, output: &BatchOutput, artifacts: bool) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("metrics.json"), output.summary.to_metrics_json())?;
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    fs::write(
        out_dir.join("table.txt"),
        summary_table(&[(label_for(cfg), output)]),
    )?;
    if artifacts {
        let traces = out_dir.join("traces");
        let renders = out_dir.join("renders");
        fs::create_dir_all(&traces)?;
        fs::create_dir_all(&renders)?;
        for (i, a) in output.artifacts.iter().enumerate() {
            if let Some(t) = &a.trace_jsonl {
                fs::write(traces.join(format!("ep{i:03}.jsonl")), t)?;
            }
            if let Some(b) = &a.occupancy_pgm {
                fs::write(renders.join(format!("ep{i:03}_occupancy.pgm")), b)?;
            }
            if let Some(b) = &a.values_pgm {
                fs::write(renders.join(format!("ep{i:03}_values.pgm")), b)?;
            }
            if let Some(b) = &a.confidences_pgm {
                fs::write(renders.join(format!("ep{i:03}_confidences.pgm")), b)?;
            }
            if let Some(b) = &a.trajectory_ppm {
                fs::write(renders.join(format!("ep{i:03}_trajectory.ppm")), b)?;
            }
        }
    }
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let mut rows: Vec<(String, BatchOutput)> = Vec::new();
    for cot in CoTLevel::ALL {
        for use_history in [true, false] {
            for use_topdown in [true, false] {
                let mut cfg = RunConfig {
                    seed: args.seed,
                    episodes: args.episodes,
                    scorer: args.scorer,
                    endpoint: args.endpoint.clone(),
                    ..RunConfig::default()
                };
                cfg.explorer.cot_level = cot;
                cfg.explorer.use_history = use_history;
                cfg.explorer.use_topdown_map = use_topdown;
                let output = execute(&cfg, false)?;
                rows.push((label_for(&cfg), output));
            }
        }
    }
    let borrowed: Vec<(String, &BatchOutput)> =
        rows.iter().map(|(l, o)| (l.clone(), o)).collect();
    let table = summary_table(&borrowed);
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("ablation.txt"), &table)?;
    println!("{table}");
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let world = match args.world {
        WorldKind::Rooms => generate_world(args.seed, args.rooms, args.width, args.height),
        WorldKind::Corridor => corridor_world(args.seed),
    };
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join(format!("world_{}.txt", args.seed)), world.to_ascii())?;
    // Ground-truth image via a fully revealed occupancy grid.
    let mut grid = OccupancyGrid::new(world.width(), world.height(), 0.1);
    for y in 0..world.height() as i32 {
        for x in 0..world.width() as i32 {
            if world.is_obstacle((x, y)) {
                grid.mark_obstacle((x, y));
            } else {
                grid.mark_free((x, y));
            }
        }
    }
    let pose = GridPose::new(world.start.x, world.start.y, world.start.heading);
    fs::write(
        args.out.join(format!("world_{}.ppm", args.seed)),
        topdown_render(&grid, &pose).to_ppm(),
    )?;
    println!("wrote world_{}.txt and world_{}.ppm in {}", args.seed, args.seed, args.out.display());
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match World::from_ascii(&text) {
        Ok(w) => {
            let connected = w.fully_connected();
            println!(
                "ok: {}x{}, {} target(s), start {:?}, fully connected: {}",
                w.width(),
                w.height(),
                w.targets.len(),
                w.start.cell(),
                connected
            );
            if !connected {
                bail!("world parses but free space is not fully connected");
            }
            Ok(())
        }
        Err(e) => bail!("invalid world: {e}"),
    }
}
