//! A* over scene states with a stacking-aware heuristic.
//!
//! The search keeps a compact node arena (parent, incoming action, g) and
//! rebuilds a node's state by replaying its action chain when it is popped.
//! Periodically, and at timeout, an MCTS goal attempt runs from the best
//! frontier node; any plan it finds becomes the incumbent if cheaper.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::CostConfig;
use crate::error::{Error, Result};
use crate::expansion::{successors, valid_stack_targets, ExpansionConfig, Stacking};
use crate::mcts::{mcts_plan, MctsConfig};
use crate::scene::{is_goal, object_at_goal, Action, GoalSpec, Plan, SceneState};

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub time_limit: Duration,
    /// Wall-clock budget of each goal attempt.
    pub goal_attempt_budget: Duration,
    /// Optional iteration cap per goal attempt, for reproducible runs.
    pub goal_attempt_iterations: Option<usize>,
    /// Expansions between goal attempts; 0 disables periodic attempts.
    pub attempt_every: usize,
    /// Arena size at which the search stops as if it had timed out.
    pub max_nodes: usize,
    pub expansion: ExpansionConfig,
    pub cost: CostConfig,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(360),
            goal_attempt_budget: Duration::from_millis(100),
            goal_attempt_iterations: None,
            attempt_every: 50,
            max_nodes: 3_000_000,
            expansion: ExpansionConfig::default(),
            cost: CostConfig::ee(),
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_zero() {
            return Err(Error::InvalidScene("time limit must be positive".into()));
        }
        self.expansion.validate()
    }

    fn attempt_config(&self, seed: u64, budget: Duration) -> MctsConfig {
        MctsConfig {
            iterations: self.goal_attempt_iterations,
            time: Some(budget),
            seed,
            expansion: ExpansionConfig { exhaustive: false, ..self.expansion.clone() },
            ..MctsConfig::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
    pub attempts: usize,
    pub attempt_hits: usize,
    /// The heap minimum reached the incumbent cost, or the heap ran empty
    /// with an incumbent.
    pub proved: bool,
    pub timed_out: bool,
}

/// Lower bound on the remaining cost from `state`.
///
/// Each off-goal object contributes the cheaper of travelling to its goal
/// and travelling to a clear base it may be stacked on (plus one
/// pick-and-place), and every off-goal object adds one pick-and-place.
pub fn heuristic(state: &SceneState, goal: &GoalSpec, cost: &CostConfig, stacking: Stacking) -> f64 {
    let tol = state.layout().tolerance();
    let mut h = 0.0;
    let mut off = 0usize;
    for id in state.ids() {
        if object_at_goal(state, goal, id, tol) {
            continue;
        }
        off += 1;
        let p = state.position(id);
        let mut best = cost.travel(p, goal.target_point(state, id));
        if stacking != Stacking::None {
            for base in valid_stack_targets(state, id) {
                best = best.min(cost.travel(p, state.position(base)) + cost.c_pp);
            }
        }
        h += best;
    }
    h + off as f64 * cost.c_pp
}

/// Canonical hash of a state: quantized positions, stack edges and the
/// manipulator cell.
pub fn signature(state: &SceneState) -> u64 {
    let res = f64::from(state.layout().resolution);
    let q = |v: f64| (v * res).round() as i64;
    let mut h = DefaultHasher::new();
    for id in state.ids() {
        let p = state.position(id);
        (q(p.x), q(p.y), state.base(id).map(|b| b.idx())).hash(&mut h);
    }
    let m = state.manipulator();
    (q(m.x), q(m.y)).hash(&mut h);
    h.finish()
}

const NO_PARENT: u32 = u32::MAX;

struct Node {
    parent: u32,
    action: Option<Action>,
    g: f64,
    sig: u64,
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    seq: u64,
    node: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    // BinaryHeap is a max-heap: smaller f, then smaller h, then older wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.h.total_cmp(&self.h)).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Incumbent {
    cost: f64,
    actions: Vec<Action>,
}

struct Search<'a> {
    s0: &'a SceneState,
    goal: &'a GoalSpec,
    cfg: &'a PlannerConfig,
    nodes: Vec<Node>,
    incumbent: Option<Incumbent>,
    stats: SearchStats,
}

impl Search<'_> {
    fn path(&self, mut id: u32) -> Vec<Action> {
        let mut out = Vec::new();
        while id != NO_PARENT {
            let n = &self.nodes[id as usize];
            out.extend(n.action);
            id = n.parent;
        }
        out.reverse();
        out
    }

    fn state_of(&self, id: u32) -> SceneState {
        self.path(id).iter().fold(self.s0.clone(), |s, a| s.apply_unchecked(a.kind))
    }

    fn improves(&self, cost: f64) -> bool {
        self.incumbent.as_ref().is_none_or(|inc| cost < inc.cost)
    }

    fn offer(&mut self, cost: f64, parent: u32, tail: impl IntoIterator<Item = Action>) {
        if self.improves(cost) {
            let mut actions = self.path(parent);
            actions.extend(tail);
            self.incumbent = Some(Incumbent { cost, actions });
        }
    }

    fn attempt(&mut self, id: u32, budget: Duration) {
        let state = self.state_of(id);
        let g = self.nodes[id as usize].g;
        let seed = self.cfg.seed ^ (self.stats.attempts as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.stats.attempts += 1;
        let mcfg = self.cfg.attempt_config(seed, budget);
        if let Some(tail) = mcts_plan(&state, self.goal, &mcfg, &self.cfg.cost) {
            self.stats.attempt_hits += 1;
            let total = g + self.cfg.cost.sequence_cost(state.manipulator(), &tail.actions);
            self.offer(total, id, tail.actions);
        }
    }
}

/// Runs A* from `s0`. See [`plan_traced`].
pub fn plan(s0: &SceneState, goal: &GoalSpec, cfg: &PlannerConfig) -> Result<Plan> {
    plan_traced(s0, goal, cfg, |_, _| {}).map(|(p, _)| p)
}

/// Runs A* and calls `on_expand(state, g)` for every expanded state.
pub fn plan_traced<F>(
    s0: &SceneState,
    goal: &GoalSpec,
    cfg: &PlannerConfig,
    mut on_expand: F,
) -> Result<(Plan, SearchStats)>
where
    F: FnMut(&SceneState, f64),
{
    cfg.validate()?;
    s0.validate()?;
    let started = Instant::now();
    let tol = s0.layout().tolerance();
    let cost = &cfg.cost;
    let stacking = cfg.expansion.stacking;
    if is_goal(s0, goal, tol) {
        return Ok((cost.make_plan(s0, std::iter::empty())?, SearchStats { proved: true, ..Default::default() }));
    }

    let mut search = Search { s0, goal, cfg, nodes: Vec::new(), incumbent: None, stats: SearchStats::default() };
    let mut heap = BinaryHeap::new();
    let mut best_g: HashMap<u64, f64> = HashMap::new();
    let mut seq = 0u64;

    let root_sig = signature(s0);
    search.nodes.push(Node { parent: NO_PARENT, action: None, g: 0.0, sig: root_sig });
    best_g.insert(root_sig, 0.0);
    let h0 = heuristic(s0, goal, cost, stacking);
    heap.push(Entry { f: h0, h: h0, seq, node: 0 });

    let mut last_attempt = usize::MAX;
    loop {
        if started.elapsed() >= cfg.time_limit || search.nodes.len() >= cfg.max_nodes {
            search.stats.timed_out = true;
            break;
        }
        let every = cfg.attempt_every;
        if every > 0 && search.stats.expansions.is_multiple_of(every) && last_attempt != search.stats.expansions {
            last_attempt = search.stats.expansions;
            if let Some(top) = heap.peek() {
                let budget = cfg.goal_attempt_budget.min(cfg.time_limit.saturating_sub(started.elapsed()));
                search.attempt(top.node, budget);
            }
        }
        let Some(entry) = heap.pop() else {
            search.stats.proved = search.incumbent.is_some();
            break;
        };
        if let Some(inc) = &search.incumbent {
            if entry.f >= inc.cost - 1e-12 {
                search.stats.proved = true;
                break;
            }
        }
        let node = &search.nodes[entry.node as usize];
        let (g, sig) = (node.g, node.sig);
        if best_g.get(&sig).is_some_and(|&b| g > b) {
            continue;
        }
        let state = search.state_of(entry.node);
        search.stats.expansions += 1;
        on_expand(&state, g);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ sig.rotate_left(17));
        let actions = match successors(&state, goal, &cfg.expansion, &mut rng) {
            Ok(a) => a,
            Err(Error::NoActions) => continue,
            Err(e) => return Err(e),
        };
        for a in actions {
            let child = state.apply_unchecked(a.kind);
            let g2 = g + cost.action_cost(state.manipulator(), &a);
            search.stats.generated += 1;
            if is_goal(&child, goal, tol) {
                let total = g2 + cost.travel(child.manipulator(), cost.home);
                search.offer(total, entry.node, [a]);
                continue;
            }
            let sig2 = signature(&child);
            if best_g.get(&sig2).is_some_and(|&b| b <= g2) {
                continue;
            }
            let h2 = heuristic(&child, goal, cost, stacking);
            let f2 = g2 + h2;
            if !search.improves(f2) {
                continue;
            }
            best_g.insert(sig2, g2);
            let id = u32::try_from(search.nodes.len()).expect("node arena fits in u32");
            search.nodes.push(Node { parent: entry.node, action: Some(a), g: g2, sig: sig2 });
            seq += 1;
            heap.push(Entry { f: f2, h: h2, seq, node: id });
        }
    }

    if search.incumbent.is_none() && search.stats.timed_out {
        let id = heap.peek().map_or(0, |e| e.node);
        search.attempt(id, cfg.goal_attempt_budget);
    }
    let stats = search.stats;
    match search.incumbent {
        Some(inc) => Ok((cost.make_plan(s0, inc.actions.into_iter().map(|a| a.kind))?, stats)),
        None => Err(Error::NoPlanFound),
    }
}

/// Quick feasible completion from `state` via MCTS.
pub fn goal_attempt(state: &SceneState, goal: &GoalSpec, budget: Duration, cfg: &PlannerConfig) -> Option<Plan> {
    mcts_plan(state, goal, &cfg.attempt_config(cfg.seed, budget), &cfg.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Placements;
    use crate::scene::tests::{obj, state};
    use crate::scene::{replay, Category, Goal, Point};

    fn quick(stacking: Stacking) -> PlannerConfig {
        PlannerConfig {
            time_limit: Duration::from_secs(20),
            goal_attempt_iterations: Some(200),
            expansion: ExpansionConfig::default().with_stacking(stacking),
            ..PlannerConfig::default()
        }
    }

    #[test]
    fn heuristic_example() {
        let s = state(
            vec![obj("spoon", Category::LowMass, 0.05), obj("bowl", Category::SecondaryBase, 0.1)],
            &[(0.1, 0.1), (0.4, 0.5)],
            &[],
        );
        let goal = GoalSpec::new(vec![Goal::Position(Point::new(0.7, 0.9)), Goal::Position(Point::new(0.4, 0.5))]);
        let h = heuristic(&s, &goal, &CostConfig::ee(), Stacking::Dynamic);
        assert!((h - 0.9).abs() < 1e-12);
        let h_ns = heuristic(&s, &goal, &CostConfig::ee(), Stacking::None);
        assert!((h_ns - 1.2).abs() < 1e-12);
    }

    #[test]
    fn heuristic_zero_at_goal() {
        let s = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3, 0.3)], &[]);
        let goal = GoalSpec::new(vec![Goal::Position(Point::new(0.3, 0.3))]);
        assert_eq!(heuristic(&s, &goal, &CostConfig::ee(), Stacking::Dynamic), 0.0);
    }

    #[test]
    fn solved_scene_gives_empty_plan() {
        let s = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3, 0.3)], &[]);
        let goal = GoalSpec::new(vec![Goal::Position(Point::new(0.3, 0.3))]);
        let p = plan(&s, &goal, &quick(Stacking::Dynamic)).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn single_free_move() {
        let s = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3, 0.4)], &[]);
        let goal = GoalSpec::new(vec![Goal::Position(Point::new(0.6, 0.8))]);
        let cfg = quick(Stacking::Dynamic);
        let p = plan(&s, &goal, &cfg).unwrap();
        assert_eq!(p.len(), 1);
        let home = cfg.cost.home;
        let expected = home.dist(Point::new(0.3, 0.4)) + 0.5 + 0.2 + Point::new(0.6, 0.8).dist(home);
        assert!((p.total_cost - expected).abs() < 1e-12);
    }

    #[test]
    fn swap_plan_replays_to_goal() {
        let s = state(
            vec![
                obj("a", Category::HighMass, 0.25),
                obj("b", Category::HighMass, 0.25),
                obj("c", Category::PrimaryBase, 0.2),
            ],
            &[(0.2, 0.2), (0.8, 0.2), (0.5, 0.75)],
            &[],
        );
        let goal = GoalSpec::new(vec![
            Goal::Position(Point::new(0.8, 0.2)),
            Goal::Position(Point::new(0.2, 0.2)),
            Goal::Position(Point::new(0.5, 0.75)),
        ]);
        for stacking in [Stacking::None, Stacking::Static, Stacking::Dynamic] {
            let cfg = quick(stacking);
            let (p, stats) = plan_traced(&s, &goal, &cfg, |_, _| {}).unwrap();
            let r = replay(&s, p.kinds()).unwrap();
            assert!(is_goal(r.final_state(), &goal, s.layout().tolerance()));
            assert!((cfg.cost.plan_cost(&s, p.kinds()).unwrap() - p.total_cost).abs() < 1e-12);
            assert!(p.len() >= 3, "{stacking:?}");
            assert!(stats.expansions > 0);
        }
    }

    #[test]
    fn optimal_on_lattice_with_stack_shortcut() {
        // Swapping a and b; the box offers a stack buffer that beats any
        // table buffer in the lattice.
        let s = state(
            vec![
                obj("a", Category::LowMass, 0.15),
                obj("b", Category::LowMass, 0.15),
                obj("box", Category::PrimaryBase, 0.15),
            ],
            &[(0.3, 0.3), (0.7, 0.3), (0.5, 0.3)],
            &[],
        );
        let goal = GoalSpec::new(vec![
            Goal::Position(Point::new(0.7, 0.3)),
            Goal::Position(Point::new(0.3, 0.3)),
            Goal::Position(Point::new(0.5, 0.3)),
        ]);
        let mut cfg = quick(Stacking::Dynamic);
        cfg.expansion.exhaustive = true;
        cfg.expansion.placements = Placements::grid(s.layout().table, 5, 5);
        let (p, stats) = plan_traced(&s, &goal, &cfg, |_, _| {}).unwrap();
        assert!(stats.proved);
        assert_eq!(p.len(), 3);
        assert!(matches!(p.actions[0].kind, crate::scene::ActionKind::Stack { .. }));
    }

    #[test]
    fn goal_attempt_edges() {
        let s = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3, 0.3)], &[]);
        let cfg = quick(Stacking::Dynamic);
        let at = GoalSpec::new(vec![Goal::Position(Point::new(0.3, 0.3))]);
        assert!(goal_attempt(&s, &at, Duration::from_millis(10), &cfg).unwrap().is_empty());
        let away = GoalSpec::new(vec![Goal::Position(Point::new(0.7, 0.3))]);
        assert!(goal_attempt(&s, &away, Duration::ZERO, &cfg).is_none());
        assert_eq!(goal_attempt(&s, &away, Duration::from_secs(1), &cfg).unwrap().len(), 1);
    }

    #[test]
    fn signature_ignores_sub_cell_noise() {
        let a = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3, 0.3)], &[]);
        let b = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.3 + 1e-7, 0.3)], &[]);
        let c = state(vec![obj("a", Category::HighMass, 0.1)], &[(0.32, 0.3)], &[]);
        assert_eq!(signature(&a), signature(&b));
        assert_ne!(signature(&a), signature(&c));
    }
}
