//! Feasibility-first Monte Carlo tree search.
//!
//! Used standalone as a baseline planner and as the fast completion engine
//! behind A* goal attempts. The search stops as soon as any tree path or
//! rollout reaches the goal; plan quality is left to refinement.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::CostConfig;
use crate::expansion::{object_actions, remaining, successors, ExpansionConfig};
use crate::scene::{is_goal, satisfied_count, Action, GoalSpec, ObjectId, Plan, SceneState};

#[derive(Clone, Debug, PartialEq)]
pub struct MctsConfig {
    /// Maximum number of tree iterations, if bounded.
    pub iterations: Option<usize>,
    /// Wall-clock budget, if bounded.
    pub time: Option<Duration>,
    pub exploration: f64,
    /// Rollout depth cap; `None` means three steps per object.
    pub rollout_depth: Option<usize>,
    pub seed: u64,
    /// Permit acting on the same object twice in a row.
    pub allow_consecutive: bool,
    pub expansion: ExpansionConfig,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            time: Some(Duration::from_secs(10)),
            exploration: std::f64::consts::SQRT_2,
            rollout_depth: None,
            seed: 0,
            allow_consecutive: true,
            expansion: ExpansionConfig::default(),
        }
    }
}

impl MctsConfig {
    fn exhausted(&self, iteration: usize, started: Instant) -> bool {
        self.iterations.is_some_and(|n| iteration >= n) || self.time.is_some_and(|t| started.elapsed() >= t)
    }

    fn has_budget(&self) -> bool {
        self.iterations != Some(0) && self.time != Some(Duration::ZERO)
    }
}

/// Rollout reward: fraction of satisfied goals, plus one when all are met.
pub fn reward(satisfied: usize, n: usize, complete: bool) -> f64 {
    let frac = if n == 0 { 1.0 } else { satisfied as f64 / n as f64 };
    frac + if complete { 1.0 } else { 0.0 }
}

struct Node {
    state: SceneState,
    parent: Option<usize>,
    action: Option<Action>,
    children: Vec<usize>,
    untried: Option<Vec<Action>>,
    visits: u32,
    value: f64,
}

struct Search<'a> {
    goal: &'a GoalSpec,
    cfg: &'a MctsConfig,
    tol: f64,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Search<'_> {
    fn candidates(&mut self, id: usize) -> Vec<Action> {
        let node = &self.nodes[id];
        let mut acts = successors(&node.state, self.goal, &self.cfg.expansion, &mut self.rng).unwrap_or_default();
        if !self.cfg.allow_consecutive {
            if let Some(last) = node.action {
                acts.retain(|a| a.object() != last.object());
            }
        }
        acts.shuffle(&mut self.rng);
        acts
    }

    fn select(&mut self) -> usize {
        let mut cur = 0;
        loop {
            if self.nodes[cur].untried.is_none() {
                let acts = self.candidates(cur);
                self.nodes[cur].untried = Some(acts);
            }
            let node = &self.nodes[cur];
            if node.untried.as_ref().is_some_and(|u| !u.is_empty()) || node.children.is_empty() {
                return cur;
            }
            let ln_n = (node.visits.max(1) as f64).ln();
            let c = self.cfg.exploration;
            cur = *node
                .children
                .iter()
                .max_by(|&&a, &&b| {
                    let score = |i: usize| {
                        let ch = &self.nodes[i];
                        let n = ch.visits.max(1) as f64;
                        ch.value / n + c * (ln_n / n).sqrt()
                    };
                    score(a).total_cmp(&score(b))
                })
                .expect("non-empty children");
        }
    }

    fn expand(&mut self, id: usize) -> usize {
        let Some(action) = self.nodes[id].untried.as_mut().and_then(|u| u.pop()) else {
            return id;
        };
        let state = self.nodes[id].state.apply_unchecked(action.kind);
        let child = self.nodes.len();
        self.nodes.push(Node {
            state,
            parent: Some(id),
            action: Some(action),
            children: Vec::new(),
            untried: None,
            visits: 0,
            value: 0.0,
        });
        self.nodes[id].children.push(child);
        child
    }

    /// Random playout. Returns the reward and, if the goal was reached, the
    /// actions taken.
    fn rollout(&mut self, from: usize) -> (f64, Option<Vec<Action>>) {
        let mut state = self.nodes[from].state.clone();
        let mut last: Option<ObjectId> = self.nodes[from].action.map(|a| a.object());
        let n = state.len();
        let depth = self.cfg.rollout_depth.unwrap_or(3 * n);
        let mut taken = Vec::new();
        let mut buf = Vec::new();
        for _ in 0..depth {
            let mut objects = remaining(&state, self.goal);
            if !self.cfg.allow_consecutive {
                objects.retain(|&o| Some(o) != last);
            }
            objects.shuffle(&mut self.rng);
            let mut chosen = None;
            for o in objects {
                buf.clear();
                if object_actions(&state, self.goal, o, &self.cfg.expansion, &mut self.rng, &mut buf).is_err() {
                    continue;
                }
                if !buf.is_empty() {
                    chosen = Some(buf[self.rng.gen_range(0..buf.len())]);
                    break;
                }
            }
            let Some(action) = chosen else { break };
            state = state.apply_unchecked(action.kind);
            last = Some(action.object());
            taken.push(action);
            if is_goal(&state, self.goal, self.tol) {
                return (reward(n, n, true), Some(taken));
            }
        }
        (reward(satisfied_count(&state, self.goal, self.tol), n, false), None)
    }

    fn backprop(&mut self, mut id: usize, value: f64) {
        loop {
            let node = &mut self.nodes[id];
            node.visits += 1;
            node.value += value;
            match node.parent {
                Some(p) => id = p,
                None => break,
            }
        }
    }

    fn path(&self, mut id: usize) -> Vec<Action> {
        let mut out = Vec::new();
        while let Some(a) = self.nodes[id].action {
            out.push(a);
            id = self.nodes[id].parent.expect("non-root has a parent");
        }
        out.reverse();
        out
    }
}

/// Searches for any feasible plan from `s0`. `None` when the budget runs out.
pub fn mcts_plan(s0: &SceneState, goal: &GoalSpec, cfg: &MctsConfig, cost: &CostConfig) -> Option<Plan> {
    let tol = s0.layout().tolerance();
    if is_goal(s0, goal, tol) {
        return cost.make_plan(s0, std::iter::empty()).ok();
    }
    if !cfg.has_budget() {
        return None;
    }
    let started = Instant::now();
    let mut search = Search {
        goal,
        cfg,
        tol,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        nodes: vec![Node {
            state: s0.clone(),
            parent: None,
            action: None,
            children: Vec::new(),
            untried: None,
            visits: 0,
            value: 0.0,
        }],
    };
    let mut iteration = 0;
    while !cfg.exhausted(iteration, started) {
        iteration += 1;
        let leaf = search.select();
        let node = search.expand(leaf);
        let n = s0.len();
        if is_goal(&search.nodes[node].state, goal, tol) {
            return finish(s0, search.path(node), cost);
        }
        let (value, found) = search.rollout(node);
        if let Some(tail) = found {
            let mut actions = search.path(node);
            actions.extend(tail);
            return finish(s0, actions, cost);
        }
        let dead =
            search.nodes[node].untried.as_ref().is_some_and(|u| u.is_empty()) && search.nodes[node].children.is_empty();
        let value =
            if dead { reward(satisfied_count(&search.nodes[node].state, goal, tol), n, false) * 0.5 } else { value };
        search.backprop(node, value);
    }
    None
}

fn finish(s0: &SceneState, actions: Vec<Action>, cost: &CostConfig) -> Option<Plan> {
    cost.make_plan(s0, actions.into_iter().map(|a| a.kind)).ok()
}
