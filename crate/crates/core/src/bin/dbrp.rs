use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use dbrp::astar::{self, PlannerConfig};
use dbrp::bench::{self, Algo, Matrix};
use dbrp::cost::Mode;
use dbrp::error::Error;
use dbrp::expansion::ExpansionConfig;
use dbrp::io::{self, DetectionsDoc, Instance, MatchingDoc, PlanDoc, SceneDoc};
use dbrp::matching::match_instances;
use dbrp::mcts::{mcts_plan, MctsConfig};
use dbrp::refine::{refine, RefineMode};
use dbrp::scene::Table;
use dbrp::scene_gen::generate_pair;
use dbrp::svg;

const SCHEMA_HELP: &str = "\
JSON documents (all carry \"schema\": 1):
  scene:      {schema, table:{w,h}, mode:\"ee\"|\"mb\", c_pp?, manipulator?:[x,y], resolution?,
               objects:[{id, category, w, d, x, y}], stacks?:[[top, base]],
               goal:[{id, x, y} | {id, on}]}
              category is one of primary_base, secondary_base, low_mass, high_mass
  plan:       {schema, actions:[{kind:\"move\", object, to:[x,y]} | {kind:\"stack\", object, base}],
               total_cost}
  detections: {schema, initial:[{class, cx, cy, w, h}], target:[...]}
  config:     {time_limit_s?, n_buf?, stack_fraction?, c_pp?, goal_attempt_ms?, attempt_every?}
Exit codes: 0 success, 1 no plan found, 2 input error.";

#[derive(Parser)]
#[command(name = "dbrp", version, about = "Tabletop rearrangement planning with dynamic stacking", after_help = SCHEMA_HELP)]
struct Cli {
    /// JSON file overriding planner defaults; explicit flags still win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "DBRP_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random start scene with a goal.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        phi: f64,
        #[arg(long, default_value = "ee")]
        mode: Mode,
        /// Table size as W,H (defaults to 1,1 for ee and 2,1 for mb).
        #[arg(long, value_parser = parse_table)]
        table: Option<Table>,
        /// Also sample stacks in the start and goal arrangements.
        #[arg(long)]
        with_stacks: bool,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan a scene.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "astar-ds")]
        algo: Algo,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        n_buf: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also draw the plan.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Prune and optimize buffers of an existing plan.
    Refine {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "dynamic")]
        mode: RefineMode,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark matrix.
    Bench {
        /// Matrix JSON; the desk-scale default is used when absent.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Full protocol (360 s, 40 seeds) instead of the desk default.
        #[arg(long, conflicts_with = "matrix")]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Line-delimited raw trial records.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Added to the scene seeds.
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Draw a scene and optionally a plan as SVG.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match initial to target detections per class.
    Match {
        #[arg(long)]
        detections: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_table(s: &str) -> Result<Table, String> {
    let (w, h) = s.split_once(',').ok_or("expected W,H")?;
    let w: f64 = w.trim().parse().map_err(|e| format!("{e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
    if !(w > 0.0 && h > 0.0) {
        return Err("table dimensions must be positive".into());
    }
    Ok(Table { w, h })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    time_limit_s: Option<f64>,
    n_buf: Option<usize>,
    stack_fraction: Option<f64>,
    c_pp: Option<f64>,
    goal_attempt_ms: Option<u64>,
    attempt_every: Option<usize>,
}

fn emit(out: Option<&Path>, text: &str) -> dbrp::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> dbrp::Result<()> {
    let config: Config = match &cli.config {
        Some(p) => io::read_json(p)?,
        None => Config::default(),
    };
    let with_config = |mut inst: Instance| {
        if let Some(c) = config.c_pp {
            inst.cost = inst.cost.with_c_pp(c);
        }
        inst
    };
    match cli.command {
        Command::Gen { n, phi, mode, table, with_stacks, seed, out } => {
            let table = table.unwrap_or(mode.default_table());
            let cost = dbrp::CostConfig::new(mode, table);
            let pair = generate_pair(n, phi, table, with_stacks, seed.seed)?.with_manipulator(cost.home);
            let inst = with_config(Instance { state: pair.initial, goal: pair.goal, cost });
            emit(out.as_deref(), &io::to_json(&SceneDoc::from_instance(&inst)))
        }
        Command::Plan { scene, algo, time_limit, n_buf, seed, out, svg } => {
            let inst = with_config(io::load_instance(&scene)?);
            let mut expansion = ExpansionConfig::default().with_stacking(algo.stacking());
            if let Some(k) = n_buf.or(config.n_buf) {
                expansion.n_buf = k;
            }
            if let Some(f) = config.stack_fraction {
                expansion.stack_fraction = f;
            }
            expansion.validate()?;
            let limit = time_limit.or(config.time_limit_s).unwrap_or(360.0);
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(Error::InvalidScene("time limit must be positive".into()));
            }
            let limit = Duration::from_secs_f64(limit);
            let plan = if algo.is_astar() {
                let mut cfg = PlannerConfig {
                    time_limit: limit,
                    expansion,
                    cost: inst.cost,
                    seed: seed.seed,
                    ..PlannerConfig::default()
                };
                if let Some(ms) = config.goal_attempt_ms {
                    cfg.goal_attempt_budget = Duration::from_millis(ms);
                }
                if let Some(k) = config.attempt_every {
                    cfg.attempt_every = k;
                }
                astar::plan(&inst.state, &inst.goal, &cfg)?
            } else {
                let cfg = MctsConfig { time: Some(limit), seed: seed.seed, expansion, ..MctsConfig::default() };
                mcts_plan(&inst.state, &inst.goal, &cfg, &inst.cost).ok_or(Error::NoPlanFound)?
            };
            eprintln!("{}: {} actions, cost {:.4}", algo.label(), plan.len(), plan.total_cost);
            if let Some(p) = svg {
                svg::write_svg(&p, &inst.state, Some(&plan))?;
            }
            emit(out.as_deref(), &io::to_json(&PlanDoc::from_plan(&plan, &inst.state)))
        }
        Command::Refine { scene, plan, mode, seed: _, out } => {
            let inst = with_config(io::load_instance(&scene)?);
            let before = io::read_json::<PlanDoc>(&plan)?.to_plan(&inst)?;
            let after = refine(&inst.state, &before, &inst.cost, mode)?;
            eprintln!(
                "refined: {} -> {} actions, cost {:.4} -> {:.4}",
                before.len(),
                after.len(),
                before.total_cost,
                after.total_cost
            );
            emit(out.as_deref(), &io::to_json(&PlanDoc::from_plan(&after, &inst.state)))
        }
        Command::Bench { matrix, full, out, raw, jobs, seed } => {
            let mut m = match (&matrix, full) {
                (Some(p), _) => io::read_json::<Matrix>(p)?,
                (None, true) => Matrix::full(),
                (None, false) => Matrix::default(),
            };
            if let Some(t) = config.time_limit_s {
                if matrix.is_none() {
                    m.time_limit_s = t;
                }
            }
            m.seed_offset += seed.seed;
            let mut raw_out = raw.map(|p| File::create(p).map(BufWriter::new)).transpose()?;
            let total = m.trials().len();
            let mut done = 0usize;
            let report = bench::run_suite(&m, jobs, |t| {
                done += 1;
                eprintln!(
                    "[{done}/{total}] {} {} phi={} n={} seed={} {}",
                    t.algo,
                    t.mode.as_str(),
                    t.phi,
                    t.n,
                    t.seed,
                    t.cost.map_or_else(|| "failed".to_string(), |c| format!("cost {c:.4}"))
                );
                if let Some(w) = raw_out.as_mut() {
                    let line = serde_json::to_string(t).expect("trial serializes");
                    let _ = writeln!(w, "{line}").and_then(|_| w.flush());
                }
            })?;
            emit(out.as_deref(), &io::to_json(&report))
        }
        Command::Render { scene, plan, seed: _, out } => {
            let inst = with_config(io::load_instance(&scene)?);
            let plan = plan.map(|p| io::read_json::<PlanDoc>(&p)?.to_plan(&inst)).transpose()?;
            svg::write_svg(&out, &inst.state, plan.as_ref())
        }
        Command::Match { detections, seed: _, out } => {
            let doc: DetectionsDoc = io::read_json(&detections)?;
            let m = match_instances(&doc.initial, &doc.target)?;
            emit(out.as_deref(), &io::to_json(&MatchingDoc::from(m)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::NoPlanFound) => {
            eprintln!("error: {}", Error::NoPlanFound);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
