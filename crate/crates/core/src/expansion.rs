//! Bounded successor generation.
//!
//! Every object that is not at its goal receives at most `n_buf` candidate
//! actions: a random sample of stack actions onto valid bases, plus either
//! the single direct-to-goal action (when the goal is reachable now) or a
//! sample of free buffer placements.

use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_index, sample_free_positions, OccupancyIndex};
use crate::scene::{object_at_goal, stack_allowed, Action, ActionKind, Goal, GoalSpec, ObjectId, Point, SceneState};

/// Which stacking primitives a planner may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stacking {
    /// No stacking except where a goal demands it.
    None,
    /// Stacks are allowed but a base carrying anything is locked in place.
    Static,
    /// Stacks are movable units: picking a base lifts its cargo.
    Dynamic,
}

impl Stacking {
    pub fn suffix(self) -> &'static str {
        match self {
            Stacking::None => "ns",
            Stacking::Static => "ss",
            Stacking::Dynamic => "ds",
        }
    }
}

impl FromStr for Stacking {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ns" | "none" => Ok(Stacking::None),
            "ss" | "static" => Ok(Stacking::Static),
            "ds" | "dynamic" => Ok(Stacking::Dynamic),
            other => Err(format!("unknown stacking mode `{other}`")),
        }
    }
}

/// Where buffer placements may be drawn from.
#[derive(Clone, Debug, PartialEq)]
pub enum Placements {
    /// Centres of occupancy grid cells.
    CellCenters,
    /// An explicit finite set of points.
    Lattice(Arc<[Point]>),
}

impl Placements {
    /// `n x n` lattice of cell centres of an even partition of `table`.
    pub fn grid(table: crate::scene::Table, nx: usize, ny: usize) -> Self {
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Point::new(table.w * (i as f64 + 0.5) / nx as f64, table.h * (j as f64 + 0.5) / ny as f64));
            }
        }
        Placements::Lattice(pts.into())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionConfig {
    /// Action budget per object.
    pub n_buf: usize,
    /// Share of the budget given to stack actions.
    pub stack_fraction: f64,
    pub stacking: Stacking,
    pub placements: Placements,
    /// Emit every valid stack and every free placement instead of sampling.
    pub exhaustive: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            n_buf: 4,
            stack_fraction: 0.6,
            stacking: Stacking::Dynamic,
            placements: Placements::CellCenters,
            exhaustive: false,
        }
    }
}

impl ExpansionConfig {
    pub fn with_stacking(mut self, stacking: Stacking) -> Self {
        self.stacking = stacking;
        self
    }

    /// Stack actions per object: `max(floor(fraction * n_buf), 1)`, or zero
    /// when stacking is disabled.
    pub fn n_stack(&self) -> usize {
        match self.stacking {
            Stacking::None => 0,
            _ => ((self.stack_fraction * self.n_buf as f64).floor() as usize).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_buf == 0 || !(0.0..=1.0).contains(&self.stack_fraction) {
            return Err(Error::InvalidScene(format!(
                "expansion needs n_buf >= 1 and 0 <= stack_fraction <= 1 (got {}, {})",
                self.n_buf, self.stack_fraction
            )));
        }
        Ok(())
    }
}

/// Whether the planner may pick `id` under the stacking policy.
pub fn can_pick(state: &SceneState, id: ObjectId, stacking: Stacking) -> bool {
    match stacking {
        Stacking::Static => state.has_clear_top(id),
        Stacking::None | Stacking::Dynamic => true,
    }
}

/// Every object `object` could be stacked onto right now.
pub fn valid_stack_targets(state: &SceneState, object: ObjectId) -> Vec<ObjectId> {
    state.ids().filter(|&j| stack_allowed(state, object, j)).collect()
}

/// Objects not yet at their goal, in id order.
pub fn remaining(state: &SceneState, goal: &GoalSpec) -> Vec<ObjectId> {
    let tol = state.layout().tolerance();
    state.ids().filter(|&i| !object_at_goal(state, goal, i, tol)).collect()
}

fn free_placements<R: Rng + ?Sized>(
    state: &SceneState,
    object: ObjectId,
    idx: &OccupancyIndex,
    cfg: &ExpansionConfig,
    k: Option<usize>,
    rng: &mut R,
) -> Vec<Point> {
    let footprint = state.spec(object).footprint;
    let here = state.position(object);
    let tol = state.layout().tolerance();
    let not_here = |p: &Point| !(state.is_root(object) && p.approx_eq(here, tol));
    match (&cfg.placements, k) {
        (Placements::CellCenters, None) => idx.free_positions(footprint).into_iter().filter(not_here).collect(),
        (Placements::CellCenters, Some(k)) => {
            // One extra so that dropping the current position still leaves k.
            let mut ps = sample_free_positions(idx, footprint, k + 1, rng);
            ps.retain(not_here);
            ps.truncate(k);
            ps
        }
        (Placements::Lattice(pts), k) => {
            let free: Vec<Point> =
                pts.iter().copied().filter(|p| not_here(p) && idx.is_placement_free(footprint, *p)).collect();
            match k {
                None => free,
                Some(k) => index::sample(rng, free.len(), k.min(free.len())).into_iter().map(|i| free[i]).collect(),
            }
        }
    }
}

/// Appends the candidate actions for one off-goal object.
pub fn object_actions<R: Rng + ?Sized>(
    state: &SceneState,
    goal: &GoalSpec,
    object: ObjectId,
    cfg: &ExpansionConfig,
    rng: &mut R,
    out: &mut Vec<Action>,
) -> Result<()> {
    if !can_pick(state, object, cfg.stacking) {
        return Ok(());
    }
    let push = |kind: ActionKind, out: &mut Vec<Action>| -> Result<()> {
        out.push(Action::resolve(kind, state)?);
        Ok(())
    };

    let idx = build_index(state, Some(object), state.layout().resolution)?;
    let direct = match goal.get(object) {
        Goal::Position(p) => {
            idx.is_placement_free(state.spec(object).footprint, p).then_some(ActionKind::Move { object, to: p })
        }
        Goal::StackOn(b) => stack_allowed(state, object, b).then_some(ActionKind::Stack { object, base: b }),
    };
    let goal_base = match goal.get(object) {
        Goal::StackOn(b) => Some(b),
        Goal::Position(_) => None,
    };

    let mut targets = if cfg.stacking == Stacking::None { Vec::new() } else { valid_stack_targets(state, object) };
    targets.retain(|&j| Some(j) != goal_base || direct.is_none());

    if cfg.exhaustive {
        for j in targets {
            push(ActionKind::Stack { object, base: j }, out)?;
        }
        if let Some(kind) = direct {
            push(kind, out)?;
        }
        let tol = state.layout().tolerance();
        for p in free_placements(state, object, &idx, cfg, None, rng) {
            if let Some(ActionKind::Move { to, .. }) = direct {
                if p.approx_eq(to, tol) {
                    continue;
                }
            }
            push(ActionKind::Move { object, to: p }, out)?;
        }
        return Ok(());
    }

    let mut n_stack = cfg.n_stack();
    if direct.is_some() {
        n_stack = n_stack.min(cfg.n_buf - 1);
    }
    let picked = index::sample(rng, targets.len(), n_stack.min(targets.len()));
    for i in picked {
        push(ActionKind::Stack { object, base: targets[i] }, out)?;
    }
    let n_stacked = n_stack.min(targets.len());

    match direct {
        Some(kind) => push(kind, out)?,
        None => {
            let n_move = cfg.n_buf - n_stacked;
            for p in free_placements(state, object, &idx, cfg, Some(n_move), rng) {
                push(ActionKind::Move { object, to: p }, out)?;
            }
        }
    }
    Ok(())
}

/// Candidate actions for every off-goal object.
///
/// Fails with [`Error::NoActions`] at a dead end.
pub fn successors<R: Rng + ?Sized>(
    state: &SceneState,
    goal: &GoalSpec,
    cfg: &ExpansionConfig,
    rng: &mut R,
) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for object in remaining(state, goal) {
        object_actions(state, goal, object, cfg, rng, &mut out)?;
    }
    if out.is_empty() {
        return Err(Error::NoActions);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::{obj, state};
    use crate::scene::{is_action_valid, Category};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pos_goal(pts: &[(f64, f64)]) -> GoalSpec {
        GoalSpec::new(pts.iter().map(|&(x, y)| Goal::Position(Point::new(x, y))).collect())
    }

    #[test]
    fn n_stack_for_default_budget() {
        let cfg = ExpansionConfig::default();
        assert_eq!(cfg.n_stack(), 2);
        let one = ExpansionConfig { n_buf: 1, ..ExpansionConfig::default() };
        assert_eq!(one.n_stack(), 1);
        let none = ExpansionConfig::default().with_stacking(Stacking::None);
        assert_eq!(none.n_stack(), 0);
    }

    #[test]
    fn stack_targets_follow_table() {
        let s = state(
            vec![
                obj("spoon", Category::LowMass, 0.05),
                obj("mug", Category::SecondaryBase, 0.1),
                obj("bowl", Category::SecondaryBase, 0.1),
                obj("fork", Category::LowMass, 0.05),
                obj("apple", Category::HighMass, 0.1),
            ],
            &[(0.1, 0.1), (0.3, 0.3), (0.6, 0.6), (0.6, 0.6), (0.85, 0.15)],
            &[(3, 2)],
        );
        assert_eq!(valid_stack_targets(&s, ObjectId(0)), vec![ObjectId(1)]);

        let heavy = state(
            vec![obj("a", Category::HighMass, 0.1), obj("b", Category::HighMass, 0.1)],
            &[(0.2, 0.2), (0.7, 0.7)],
            &[],
        );
        for i in heavy.ids() {
            assert!(valid_stack_targets(&heavy, i).is_empty());
        }
    }

    #[test]
    fn stack_targets_match_validity_oracle() {
        let s = state(
            vec![
                obj("box", Category::PrimaryBase, 0.2),
                obj("mug", Category::SecondaryBase, 0.1),
                obj("spoon", Category::LowMass, 0.05),
                obj("bowl", Category::SecondaryBase, 0.1),
                obj("apple", Category::HighMass, 0.1),
                obj("crate", Category::PrimaryBase, 0.2),
            ],
            &[(0.2, 0.2), (0.2, 0.2), (0.6, 0.2), (0.6, 0.6), (0.85, 0.85), (0.3, 0.75)],
            &[(1, 0)],
        );
        for i in s.ids() {
            let oracle: Vec<ObjectId> =
                s.ids().filter(|&j| is_action_valid(&s, ActionKind::Stack { object: i, base: j })).collect();
            assert_eq!(valid_stack_targets(&s, i), oracle, "object {i}");
        }
    }

    #[test]
    fn free_goal_without_bases_gives_single_move() {
        let s = state(
            vec![obj("a", Category::HighMass, 0.1), obj("b", Category::HighMass, 0.1)],
            &[(0.2, 0.2), (0.7, 0.7)],
            &[],
        );
        let goal = pos_goal(&[(0.4, 0.4), (0.7, 0.7)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let acts = successors(&s, &goal, &ExpansionConfig::default(), &mut rng).unwrap();
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].kind, ActionKind::Move { object: ObjectId(0), to: Point::new(0.4, 0.4) });
    }

    #[test]
    fn blocked_goal_gets_stacks_and_sampled_moves() {
        // Spoon's goal is under the apple; two bases are available.
        let s = state(
            vec![
                obj("spoon", Category::LowMass, 0.05),
                obj("apple", Category::HighMass, 0.1),
                obj("mug", Category::SecondaryBase, 0.1),
                obj("box", Category::PrimaryBase, 0.1),
            ],
            &[(0.1, 0.1), (0.5, 0.5), (0.8, 0.2), (0.2, 0.8)],
            &[],
        );
        let goal = pos_goal(&[(0.5, 0.5), (0.5, 0.5), (0.8, 0.2), (0.2, 0.8)]);
        // The apple must not count: give it its goal.
        let goal = GoalSpec::new(vec![
            goal.targets[0],
            Goal::Position(Point::new(0.5, 0.5)),
            goal.targets[2],
            goal.targets[3],
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut out = Vec::new();
        object_actions(&s, &goal, ObjectId(0), &ExpansionConfig::default(), &mut rng, &mut out).unwrap();
        let stacks = out.iter().filter(|a| matches!(a.kind, ActionKind::Stack { .. })).count();
        let moves = out.iter().filter(|a| matches!(a.kind, ActionKind::Move { .. })).count();
        assert_eq!((stacks, moves), (2, 2));
        for a in &out {
            assert!(is_action_valid(&s, a.kind));
        }
    }

    #[test]
    fn direct_goal_bias_with_stacks() {
        let s = state(
            vec![
                obj("spoon", Category::LowMass, 0.05),
                obj("mug", Category::SecondaryBase, 0.1),
                obj("box", Category::PrimaryBase, 0.1),
                obj("bowl", Category::SecondaryBase, 0.1),
            ],
            &[(0.1, 0.1), (0.5, 0.5), (0.8, 0.2), (0.2, 0.8)],
            &[],
        );
        let goal = pos_goal(&[(0.8, 0.8), (0.5, 0.5), (0.8, 0.2), (0.2, 0.8)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acts = successors(&s, &goal, &ExpansionConfig::default(), &mut rng).unwrap();
        let moves: Vec<_> = acts.iter().filter(|a| matches!(a.kind, ActionKind::Move { .. })).collect();
        assert_eq!(moves.len(), 1);
        assert_eq!(moves[0].place, Point::new(0.8, 0.8));
        assert_eq!(acts.len(), 3);
        assert!(acts.len() <= 4);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = state(
            vec![
                obj("spoon", Category::LowMass, 0.05),
                obj("apple", Category::HighMass, 0.1),
                obj("mug", Category::SecondaryBase, 0.1),
            ],
            &[(0.1, 0.1), (0.5, 0.5), (0.8, 0.2)],
            &[],
        );
        let goal = pos_goal(&[(0.5, 0.5), (0.2, 0.7), (0.8, 0.2)]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            successors(&s, &goal, &ExpansionConfig::default(), &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn static_stacking_locks_loaded_bases() {
        let s = state(
            vec![obj("mug", Category::SecondaryBase, 0.1), obj("spoon", Category::LowMass, 0.05)],
            &[(0.2, 0.2), (0.2, 0.2)],
            &[(1, 0)],
        );
        let goal = GoalSpec::new(vec![Goal::Position(Point::new(0.7, 0.7)), Goal::StackOn(ObjectId(0))]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ss = ExpansionConfig::default().with_stacking(Stacking::Static);
        assert!(matches!(successors(&s, &goal, &ss, &mut rng), Err(Error::NoActions)));
        let ds = ExpansionConfig::default();
        let acts = successors(&s, &goal, &ds, &mut rng).unwrap();
        assert!(acts.iter().any(|a| a.kind == ActionKind::Move { object: ObjectId(0), to: Point::new(0.7, 0.7) }));
    }

    #[test]
    fn stack_goal_gets_direct_stack() {
        let s = state(
            vec![
                obj("mug", Category::SecondaryBase, 0.1),
                obj("spoon", Category::LowMass, 0.05),
                obj("box", Category::PrimaryBase, 0.1),
            ],
            &[(0.2, 0.2), (0.6, 0.6), (0.8, 0.2)],
            &[],
        );
        let goal = GoalSpec::new(vec![
            Goal::Position(Point::new(0.2, 0.2)),
            Goal::StackOn(ObjectId(0)),
            Goal::Position(Point::new(0.8, 0.2)),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ExpansionConfig::default().with_stacking(Stacking::None);
        let acts = successors(&s, &goal, &cfg, &mut rng).unwrap();
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].kind, ActionKind::Stack { object: ObjectId(1), base: ObjectId(0) });
    }

    #[test]
    fn exhaustive_lattice_enumerates_all() {
        let s = state(
            vec![obj("a", Category::HighMass, 0.15), obj("b", Category::HighMass, 0.15)],
            &[(0.1, 0.1), (0.3, 0.1)],
            &[],
        );
        let goal = pos_goal(&[(0.9, 0.9), (0.3, 0.1)]);
        let cfg = ExpansionConfig {
            exhaustive: true,
            placements: Placements::grid(crate::scene::Table::UNIT, 5, 5),
            ..ExpansionConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let acts = successors(&s, &goal, &cfg, &mut rng).unwrap();
        // 25 lattice points minus a's own and b's.
        assert_eq!(acts.len(), 23);
    }
}
