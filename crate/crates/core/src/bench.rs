//! Benchmark harness: seeded trials across planners and the aggregate
//! metrics (success rate, ESC, OPS, PIR).
//!
//! Aggregates are recomputed from raw trial records only, so a report can
//! always be rebuilt from its ndjson log.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astar::{self, PlannerConfig};
use crate::cost::{CostConfig, Mode};
use crate::error::{Error, Result};
use crate::expansion::{ExpansionConfig, Stacking};
use crate::mcts::{mcts_plan, MctsConfig};
use crate::refine::{refine, RefineMode};
use crate::scene::{is_goal, replay, GoalSpec, Plan, SceneState};
use crate::scene_gen::generate_pair;

/// Expected succeeded cost: mean cost of successes over the success rate.
pub fn esc(avg_cost: f64, success_rate: f64) -> Result<f64> {
    if success_rate <= 0.0 {
        return Err(Error::ZeroSuccess);
    }
    Ok(avg_cost / success_rate)
}

/// Overall performance score: mean ESC over object counts.
pub fn ops(esc_values: &[f64]) -> Result<f64> {
    if esc_values.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(esc_values.iter().sum::<f64>() / esc_values.len() as f64)
}

/// Improvement of `ops_b` over `ops_a`, in percent. Positive means B is
/// cheaper.
pub fn pir(ops_a: f64, ops_b: f64) -> f64 {
    (ops_a - ops_b) / ops_a * 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algo {
    #[serde(rename = "astar-ds")]
    AstarDs,
    #[serde(rename = "astar-ss")]
    AstarSs,
    #[serde(rename = "astar-ns")]
    AstarNs,
    #[serde(rename = "mcts-ds")]
    MctsDs,
    #[serde(rename = "mcts-ns")]
    MctsNs,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::AstarDs, Algo::AstarSs, Algo::AstarNs, Algo::MctsDs, Algo::MctsNs];

    pub fn id(self) -> &'static str {
        match self {
            Algo::AstarDs => "astar-ds",
            Algo::AstarSs => "astar-ss",
            Algo::AstarNs => "astar-ns",
            Algo::MctsDs => "mcts-ds",
            Algo::MctsNs => "mcts-ns",
        }
    }

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Algo::AstarDs => "STRAP+DS",
            Algo::AstarSs => "STRAP+SS",
            Algo::AstarNs => "STRAP",
            Algo::MctsDs => "MCTS+DS",
            Algo::MctsNs => "MCTS",
        }
    }

    pub fn stacking(self) -> Stacking {
        match self {
            Algo::AstarDs | Algo::MctsDs => Stacking::Dynamic,
            Algo::AstarSs => Stacking::Static,
            Algo::AstarNs | Algo::MctsNs => Stacking::None,
        }
    }

    pub fn is_astar(self) -> bool {
        matches!(self, Algo::AstarDs | Algo::AstarSs | Algo::AstarNs)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Algo::ALL.into_iter().find(|a| a.id() == s).ok_or_else(|| {
            format!("unknown algorithm `{s}` (expected one of astar-ds, astar-ss, astar-ns, mcts-ds, mcts-ns)")
        })
    }
}

/// Runs one planner on one instance. `Ok(None)` means no plan in budget.
pub fn run_algo(
    algo: Algo,
    s0: &SceneState,
    goal: &GoalSpec,
    cost: &CostConfig,
    expansion: &ExpansionConfig,
    time_limit: Duration,
    seed: u64,
) -> Result<Option<Plan>> {
    let expansion = expansion.clone().with_stacking(algo.stacking());
    if algo.is_astar() {
        let cfg = PlannerConfig { time_limit, expansion, cost: *cost, seed, ..PlannerConfig::default() };
        match astar::plan(s0, goal, &cfg) {
            Ok(p) => Ok(Some(p)),
            Err(Error::NoPlanFound) => Ok(None),
            Err(e) => Err(e),
        }
    } else {
        let cfg = MctsConfig { time: Some(time_limit), seed, expansion, ..MctsConfig::default() };
        Ok(mcts_plan(s0, goal, &cfg, cost))
    }
}

/// A (φ, n) pair left out of OPS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub phi: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Matrix {
    pub algos: Vec<Algo>,
    pub n: Vec<usize>,
    pub phi: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Scene seeds `0..seeds`, shared by all algorithms.
    pub seeds: u64,
    /// Added to every scene seed.
    pub seed_offset: u64,
    pub time_limit_s: f64,
    pub with_stacks: bool,
    pub n_buf: usize,
    /// Refine successful plans and record the refined cost.
    pub refine: Option<RefineMode>,
    pub exclude: Vec<Exclusion>,
}

impl Default for Matrix {
    /// Desk-scale protocol: 30 s per trial and 10 seeds.
    fn default() -> Self {
        Self {
            algos: vec![Algo::AstarDs, Algo::AstarSs, Algo::AstarNs, Algo::MctsDs, Algo::MctsNs],
            n: vec![4, 5, 6, 7, 8],
            phi: vec![0.2, 0.5],
            modes: vec![Mode::Ee, Mode::Mb],
            seeds: 10,
            seed_offset: 0,
            time_limit_s: 30.0,
            with_stacks: false,
            n_buf: ExpansionConfig::default().n_buf,
            refine: None,
            exclude: vec![Exclusion { phi: 0.5, n: 4 }],
        }
    }
}

impl Matrix {
    /// Full protocol: 6 minutes per trial and 40 seeds.
    pub fn full() -> Self {
        Self { seeds: 40, time_limit_s: 360.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScene(format!("benchmark matrix: {m}")));
        if self.algos.is_empty() || self.n.is_empty() || self.phi.is_empty() || self.modes.is_empty() {
            return bad("algos, n, phi and modes must be non-empty");
        }
        if self.seeds == 0 {
            return bad("seeds must be positive");
        }
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) {
            return bad("time_limit_s must be positive");
        }
        if self.phi.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("phi values must lie in (0, 1)");
        }
        if self.n.contains(&0) {
            return bad("n values must be positive");
        }
        if self.n_buf == 0 {
            return bad("n_buf must be positive");
        }
        Ok(())
    }

    fn excluded(&self, phi: f64, n: usize) -> bool {
        self.exclude.iter().any(|e| e.n == n && (e.phi - phi).abs() < 1e-9)
    }

    /// Every trial in a fixed order: mode, phi, n, seed, algo.
    pub fn trials(&self) -> Vec<TrialSpec> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            for &phi in &self.phi {
                for &n in &self.n {
                    for s in 0..self.seeds {
                        for &algo in &self.algos {
                            out.push(TrialSpec { algo, mode, phi, n, seed: self.seed_offset + s });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSpec {
    pub algo: Algo,
    pub mode: Mode,
    pub phi: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub algo: Algo,
    pub mode: Mode,
    pub phi: f64,
    pub n: usize,
    pub seed: u64,
    pub n_buf: usize,
    pub success: bool,
    pub cost: Option<f64>,
    pub actions: Option<usize>,
    pub refined_cost: Option<f64>,
    pub wall_time_s: f64,
    /// Why the trial failed, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Generates the scene pair for `spec` and runs its planner. Failures of
/// any kind are recorded, never propagated.
pub fn run_trial(spec: TrialSpec, matrix: &Matrix) -> TrialResult {
    let started = Instant::now();
    let mut result = TrialResult {
        algo: spec.algo,
        mode: spec.mode,
        phi: spec.phi,
        n: spec.n,
        seed: spec.seed,
        n_buf: matrix.n_buf,
        success: false,
        cost: None,
        actions: None,
        refined_cost: None,
        wall_time_s: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<Option<(Plan, Option<f64>)>> {
        let table = spec.mode.default_table();
        let cost = CostConfig::new(spec.mode, table);
        let pair = generate_pair(spec.n, spec.phi, table, matrix.with_stacks, spec.seed)?.with_manipulator(cost.home);
        let expansion = ExpansionConfig { n_buf: matrix.n_buf, ..ExpansionConfig::default() };
        let limit = Duration::from_secs_f64(matrix.time_limit_s);
        let Some(plan) = run_algo(spec.algo, &pair.initial, &pair.goal, &cost, &expansion, limit, spec.seed)? else {
            return Ok(None);
        };
        // Replay oracle on every returned plan.
        let r = replay(&pair.initial, plan.kinds())?;
        if !is_goal(r.final_state(), &pair.goal, pair.initial.layout().tolerance()) {
            return Err(Error::InvalidPlan { index: plan.len(), reason: "plan does not reach the goal".into() });
        }
        let refined = match matrix.refine {
            Some(mode) => {
                let p = refine(&pair.initial, &plan, &cost, mode)?;
                if p.total_cost > plan.total_cost + 1e-9 {
                    return Err(Error::InvalidPlan { index: 0, reason: "refinement increased cost".into() });
                }
                Some(p.total_cost)
            }
            None => None,
        };
        Ok(Some((plan, refined)))
    })();
    match outcome {
        Ok(Some((plan, refined))) => {
            result.success = true;
            result.cost = Some(plan.total_cost);
            result.actions = Some(plan.len());
            result.refined_cost = refined;
        }
        Ok(None) => result.error = Some("no plan found".into()),
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_time_s = started.elapsed().as_secs_f64();
    result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub algo: Algo,
    pub mode: Mode,
    pub phi: f64,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over successful trials.
    pub avg_cost: Option<f64>,
    pub avg_actions: Option<f64>,
    pub avg_refined_cost: Option<f64>,
    /// `None` when no trial succeeded.
    pub esc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpsEntry {
    pub algo: Algo,
    pub mode: Mode,
    pub phi: f64,
    /// Object counts averaged over.
    pub n: Vec<usize>,
    /// `None` if any ESC in the set is undefined.
    pub ops: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PirEntry {
    pub mode: Mode,
    pub phi: f64,
    /// Baseline.
    pub a: Algo,
    /// Compared algorithm; positive PIR means it is cheaper.
    pub b: Algo,
    pub pir: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub matrix: Matrix,
    pub groups: Vec<GroupStats>,
    pub ops: Vec<OpsEntry>,
    pub pir: Vec<PirEntry>,
}

impl BenchmarkReport {
    pub fn ops_of(&self, algo: Algo, mode: Mode, phi: f64) -> Option<f64> {
        self.ops.iter().find(|o| o.algo == algo && o.mode == mode && (o.phi - phi).abs() < 1e-9).and_then(|o| o.ops)
    }

    pub fn pir_of(&self, a: Algo, b: Algo, mode: Mode, phi: f64) -> Option<f64> {
        self.pir.iter().find(|p| p.a == a && p.b == b && p.mode == mode && (p.phi - phi).abs() < 1e-9).map(|p| p.pir)
    }

    pub fn group(&self, algo: Algo, mode: Mode, phi: f64, n: usize) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.algo == algo && g.mode == mode && (g.phi - phi).abs() < 1e-9 && g.n == n)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Folds raw trials into per-group statistics, OPS and pairwise PIR.
pub fn aggregate(matrix: &Matrix, trials: &[TrialResult]) -> BenchmarkReport {
    // Keys use phi bits so that groups sort and compare exactly.
    type Key = (Algo, Mode, u64, usize);
    let mut by_group: BTreeMap<Key, Vec<&TrialResult>> = BTreeMap::new();
    for t in trials {
        by_group.entry((t.algo, t.mode, t.phi.to_bits(), t.n)).or_default().push(t);
    }
    let groups: Vec<GroupStats> = by_group
        .iter()
        .map(|(&(algo, mode, phi, n), ts)| {
            let ok: Vec<&&TrialResult> = ts.iter().filter(|t| t.success).collect();
            let rate = ok.len() as f64 / ts.len() as f64;
            let avg_cost = mean(ok.iter().filter_map(|t| t.cost));
            GroupStats {
                algo,
                mode,
                phi: f64::from_bits(phi),
                n,
                trials: ts.len(),
                successes: ok.len(),
                success_rate: rate,
                avg_cost,
                avg_actions: mean(ok.iter().filter_map(|t| t.actions.map(|a| a as f64))),
                avg_refined_cost: mean(ok.iter().filter_map(|t| t.refined_cost)),
                esc: avg_cost.and_then(|c| esc(c, rate).ok()),
            }
        })
        .collect();

    let mut by_set: BTreeMap<(Algo, Mode, u64), Vec<&GroupStats>> = BTreeMap::new();
    for g in &groups {
        if !matrix.excluded(g.phi, g.n) {
            by_set.entry((g.algo, g.mode, g.phi.to_bits())).or_default().push(g);
        }
    }
    let ops_entries: Vec<OpsEntry> = by_set
        .iter()
        .map(|(&(algo, mode, phi), gs)| {
            let escs: Option<Vec<f64>> = gs.iter().map(|g| g.esc).collect();
            OpsEntry {
                algo,
                mode,
                phi: f64::from_bits(phi),
                n: gs.iter().map(|g| g.n).collect(),
                ops: escs.and_then(|e| ops(&e).ok()),
            }
        })
        .collect();

    let mut pir_entries = Vec::new();
    for a in &ops_entries {
        for b in &ops_entries {
            if a.algo == b.algo || a.mode != b.mode || a.phi.to_bits() != b.phi.to_bits() {
                continue;
            }
            if let (Some(oa), Some(ob)) = (a.ops, b.ops) {
                pir_entries.push(PirEntry { mode: a.mode, phi: a.phi, a: a.algo, b: b.algo, pir: pir(oa, ob) });
            }
        }
    }
    BenchmarkReport { schema: 1, matrix: matrix.clone(), groups, ops: ops_entries, pir: pir_entries }
}

/// Runs every trial of `matrix` on `jobs` worker threads, passing each
/// finished trial to `on_trial` as it completes.
pub fn run_suite<F>(matrix: &Matrix, jobs: usize, on_trial: F) -> Result<BenchmarkReport>
where
    F: FnMut(&TrialResult) + Send,
{
    matrix.validate()?;
    let specs = matrix.trials();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidScene(format!("thread pool: {e}")))?;
    let sink = Mutex::new(on_trial);
    let mut trials: Vec<(usize, TrialResult)> = pool.install(|| {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, &spec)| {
                let r = run_trial(spec, matrix);
                (sink.lock().expect("trial sink poisoned"))(&r);
                (i, r)
            })
            .collect()
    });
    trials.sort_by_key(|(i, _)| *i);
    let trials: Vec<TrialResult> = trials.into_iter().map(|(_, t)| t).collect();
    Ok(aggregate(matrix, &trials))
}
