//! Objects, the stacking forest, scene states, goals and the action
//! transition function.
//!
//! A [`SceneState`] is an immutable value: [`apply_action`] returns a new
//! state. Moving an object carries every object stacked above it, so a base
//! with cargo acts as a movable buffer.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_index, OccupancyIndex};

/// Slack used when comparing coordinates that should be identical.
pub(crate) const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn approx_eq(self, other: Point, tol: f64) -> bool {
        self.dist(other) <= tol
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4})", self.x, self.y)
    }
}

/// Functional object group, which decides what may be stacked on what.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Boxes, pots, baskets: can carry any other group.
    PrimaryBase,
    /// Bowls, mugs, cups: carry low-mass items only.
    SecondaryBase,
    /// Spoons, forks, knives.
    LowMass,
    /// Apples, pears, bananas.
    HighMass,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::PrimaryBase, Category::SecondaryBase, Category::LowMass, Category::HighMass];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::PrimaryBase => "primary_base",
            Category::SecondaryBase => "secondary_base",
            Category::LowMass => "low_mass",
            Category::HighMass => "high_mass",
        }
    }
}

/// Stacking-stability lookup: `can_stack(top, base)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryTable {
    allowed: [[bool; 4]; 4],
}

impl Default for CategoryTable {
    fn default() -> Self {
        use Category::*;
        let mut allowed = [[false; 4]; 4];
        for (top, base) in
            [(LowMass, SecondaryBase), (LowMass, PrimaryBase), (SecondaryBase, PrimaryBase), (HighMass, PrimaryBase)]
        {
            allowed[top.index()][base.index()] = true;
        }
        Self { allowed }
    }
}

impl CategoryTable {
    pub fn can_stack(&self, top: Category, base: Category) -> bool {
        self.allowed[top.index()][base.index()]
    }
}

/// Axis-aligned rectangular footprint in table units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub w: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    pub category: Category,
    pub footprint: Footprint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub w: f64,
    pub h: f64,
}

impl Table {
    pub const UNIT: Table = Table { w: 1.0, h: 1.0 };

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= -EPS && p.y >= -EPS && p.x <= self.w + EPS && p.y <= self.h + EPS
    }

    /// Whether `footprint` centred at `at` lies on the table.
    pub fn fits(&self, footprint: Footprint, at: Point) -> bool {
        at.x - footprint.w / 2.0 >= -EPS
            && at.y - footprint.d / 2.0 >= -EPS
            && at.x + footprint.w / 2.0 <= self.w + EPS
            && at.y + footprint.d / 2.0 <= self.h + EPS
    }
}

/// Default grid resolution in cells per table unit.
pub const DEFAULT_RESOLUTION: u32 = 100;

/// The parts of a scene that never change during planning.
#[derive(Clone, Debug)]
pub struct Layout {
    pub table: Table,
    pub objects: Vec<ObjectSpec>,
    pub stacking: CategoryTable,
    /// Occupancy grid resolution in cells per table unit.
    pub resolution: u32,
}

impl Layout {
    pub fn new(table: Table, objects: Vec<ObjectSpec>) -> Self {
        Self { table, objects, stacking: CategoryTable::default(), resolution: DEFAULT_RESOLUTION }
    }

    pub fn find(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|o| o.name == name).map(ObjectId)
    }

    /// Goal and replay tolerance: one grid cell.
    pub fn tolerance(&self) -> f64 {
        1.0 / self.resolution as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub usize);

impl ObjectId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Object arrangement plus manipulator position.
///
/// Stacked objects carry the position of the root of their stack. Only
/// roots occupy the table.
#[derive(Clone, Debug)]
pub struct SceneState {
    layout: Arc<Layout>,
    positions: Vec<Point>,
    base_of: Vec<Option<ObjectId>>,
    top_of: Vec<Option<ObjectId>>,
    manipulator: Point,
}

impl SceneState {
    /// Builds and validates a state. Positions of stacked objects are
    /// snapped to the position of their stack root.
    pub fn new(
        layout: Arc<Layout>,
        positions: Vec<Point>,
        stacks: &[(ObjectId, ObjectId)],
        manipulator: Point,
    ) -> Result<Self> {
        let n = layout.objects.len();
        if positions.len() != n {
            return Err(Error::InvalidScene(format!("{} positions for {} objects", positions.len(), n)));
        }
        let mut base_of = vec![None; n];
        let mut top_of = vec![None; n];
        for &(top, base) in stacks {
            if top.idx() >= n || base.idx() >= n {
                return Err(Error::InvalidScene(format!("stack {top} on {base} out of range")));
            }
            if top == base {
                return Err(Error::InvalidScene(format!("{} stacked on itself", layout.objects[top.idx()].name)));
            }
            if base_of[top.idx()].replace(base).is_some() {
                return Err(Error::InvalidScene(format!("{} has more than one base", layout.objects[top.idx()].name)));
            }
            if top_of[base.idx()].replace(top).is_some() {
                return Err(Error::InvalidScene(format!(
                    "{} supports more than one item",
                    layout.objects[base.idx()].name
                )));
            }
        }
        let mut state = Self { layout, positions, base_of, top_of, manipulator };
        state.check_forest()?;
        for i in 0..n {
            let root = state.root_of(ObjectId(i));
            state.positions[i] = state.positions[root.idx()];
        }
        state.validate()?;
        Ok(state)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> {
        (0..self.len()).map(ObjectId)
    }

    pub fn spec(&self, id: ObjectId) -> &ObjectSpec {
        &self.layout.objects[id.idx()]
    }

    pub fn category(&self, id: ObjectId) -> Category {
        self.layout.objects[id.idx()].category
    }

    pub fn position(&self, id: ObjectId) -> Point {
        self.positions[id.idx()]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn manipulator(&self) -> Point {
        self.manipulator
    }

    pub fn with_manipulator(mut self, at: Point) -> Self {
        self.manipulator = at;
        self
    }

    /// The object `id` is stacked on, if any.
    pub fn base(&self, id: ObjectId) -> Option<ObjectId> {
        self.base_of[id.idx()]
    }

    /// The object stacked directly on `id`, if any.
    pub fn top(&self, id: ObjectId) -> Option<ObjectId> {
        self.top_of[id.idx()]
    }

    pub fn is_root(&self, id: ObjectId) -> bool {
        self.base_of[id.idx()].is_none()
    }

    pub fn has_clear_top(&self, id: ObjectId) -> bool {
        self.top_of[id.idx()].is_none()
    }

    pub fn roots(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.ids().filter(|&i| self.is_root(i))
    }

    /// Forest edges as `(top, base)` pairs, ordered by `top`.
    pub fn stacks(&self) -> Vec<(ObjectId, ObjectId)> {
        self.ids().filter_map(|i| self.base(i).map(|b| (i, b))).collect()
    }

    pub fn root_of(&self, mut id: ObjectId) -> ObjectId {
        while let Some(b) = self.base_of[id.idx()] {
            id = b;
        }
        id
    }

    /// Objects transitively stacked above `id`, nearest first.
    pub fn dependents(&self, id: ObjectId) -> Dependents<'_> {
        Dependents { state: self, next: self.top_of[id.idx()] }
    }

    /// `id` followed by its dependents; this is what moves when `id` is picked.
    pub fn sub_stack(&self, id: ObjectId) -> impl Iterator<Item = ObjectId> + '_ {
        std::iter::once(id).chain(self.dependents(id))
    }

    pub fn in_sub_stack(&self, of: ObjectId, id: ObjectId) -> bool {
        self.sub_stack(of).any(|o| o == id)
    }

    fn check_forest(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            let mut cur = ObjectId(i);
            let mut steps = 0;
            while let Some(b) = self.base_of[cur.idx()] {
                let (top, base) = (self.category(cur), self.category(b));
                if !self.layout.stacking.can_stack(top, base) {
                    return Err(Error::InvalidScene(format!(
                        "{} ({}) cannot be stacked on {} ({})",
                        self.spec(cur).name,
                        top.as_str(),
                        self.spec(b).name,
                        base.as_str()
                    )));
                }
                cur = b;
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidScene("stacking relation has a cycle".into()));
                }
            }
        }
        Ok(())
    }

    /// Checks every state invariant.
    pub fn validate(&self) -> Result<()> {
        self.check_forest()?;
        let layout = &*self.layout;
        let tol = layout.tolerance();
        for spec in &layout.objects {
            if !(spec.footprint.w > 0.0 && spec.footprint.d > 0.0) {
                return Err(Error::InvalidScene(format!("{} has an empty footprint", spec.name)));
            }
        }
        for (i, a) in layout.objects.iter().enumerate() {
            if layout.objects[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidScene(format!("duplicate object id {}", a.name)));
            }
        }
        for i in self.ids() {
            let root = self.root_of(i);
            if !self.position(i).approx_eq(self.position(root), tol) {
                return Err(Error::InvalidScene(format!(
                    "{} is stacked but not at its base position",
                    self.spec(i).name
                )));
            }
        }
        let roots: Vec<ObjectId> = self.roots().collect();
        for (k, &a) in roots.iter().enumerate() {
            if !layout.table.fits(self.spec(a).footprint, self.position(a)) {
                return Err(Error::InvalidScene(format!("{} is off the table", self.spec(a).name)));
            }
            for &b in &roots[..k] {
                if footprints_overlap(
                    self.spec(a).footprint,
                    self.position(a),
                    self.spec(b).footprint,
                    self.position(b),
                ) {
                    return Err(Error::InvalidScene(format!("{} overlaps {}", self.spec(a).name, self.spec(b).name)));
                }
            }
        }
        if !layout.table.contains(self.manipulator) {
            return Err(Error::InvalidScene("manipulator outside the workspace".into()));
        }
        Ok(())
    }

    /// Same positions (within `tol`) and the same forest edges.
    pub fn same_arrangement(&self, other: &SceneState, tol: f64) -> bool {
        self.len() == other.len()
            && self.base_of == other.base_of
            && self.positions.iter().zip(&other.positions).all(|(a, b)| a.approx_eq(*b, tol))
    }

    /// Applies a kind without any validity check.
    pub(crate) fn apply_unchecked(&self, kind: ActionKind) -> SceneState {
        let mut next = self.clone();
        let object = kind.object();
        let place = match kind {
            ActionKind::Move { to, .. } => {
                next.detach(object);
                to
            }
            ActionKind::Stack { base, .. } => {
                next.detach(object);
                next.base_of[object.idx()] = Some(base);
                next.top_of[base.idx()] = Some(object);
                next.positions[base.idx()]
            }
        };
        let moved: Vec<ObjectId> = next.sub_stack(object).collect();
        for o in moved {
            next.positions[o.idx()] = place;
        }
        next.manipulator = place;
        next
    }

    fn detach(&mut self, object: ObjectId) {
        if let Some(b) = self.base_of[object.idx()].take() {
            self.top_of[b.idx()] = None;
        }
    }
}

pub struct Dependents<'a> {
    state: &'a SceneState,
    next: Option<ObjectId>,
}

impl Iterator for Dependents<'_> {
    type Item = ObjectId;

    fn next(&mut self) -> Option<ObjectId> {
        let cur = self.next?;
        self.next = self.state.top_of[cur.idx()];
        Some(cur)
    }
}

/// Strict overlap: rectangles that only touch do not overlap.
pub fn footprints_overlap(fa: Footprint, pa: Point, fb: Footprint, pb: Point) -> bool {
    let ox = (fa.w + fb.w) / 2.0 - (pa.x - pb.x).abs();
    let oy = (fa.d + fb.d) / 2.0 - (pa.y - pb.y).abs();
    ox > EPS && oy > EPS
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Goal {
    Position(Point),
    StackOn(ObjectId),
}

/// One goal entry per object, indexed by object id.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalSpec {
    pub targets: Vec<Goal>,
}

impl GoalSpec {
    pub fn new(targets: Vec<Goal>) -> Self {
        Self { targets }
    }

    pub fn get(&self, id: ObjectId) -> Goal {
        self.targets[id.idx()]
    }

    /// The arrangement the goal describes, with the manipulator of `like`.
    pub fn goal_state(&self, like: &SceneState) -> Result<SceneState> {
        let n = like.len();
        if self.targets.len() != n {
            return Err(Error::InvalidScene(format!("{} goal entries for {} objects", self.targets.len(), n)));
        }
        let mut positions = vec![Point::default(); n];
        let mut stacks = Vec::new();
        for (i, goal) in self.targets.iter().enumerate() {
            match *goal {
                Goal::Position(p) => positions[i] = p,
                Goal::StackOn(b) => {
                    if b.idx() >= n {
                        return Err(Error::InvalidScene(format!("goal base {b} out of range")));
                    }
                    stacks.push((ObjectId(i), b));
                }
            }
        }
        // Stacked objects take the root position; resolve through chains.
        for i in 0..n {
            let mut cur = i;
            let mut steps = 0;
            while let Goal::StackOn(b) = self.targets[cur] {
                cur = b.idx();
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidScene("goal stacking has a cycle".into()));
                }
            }
            positions[i] = positions[cur];
        }
        SceneState::new(like.layout.clone(), positions, &stacks, like.manipulator)
            .map_err(|e| Error::InvalidScene(format!("goal arrangement: {e}")))
    }

    /// Where the object would need to go right now to satisfy its goal.
    pub fn target_point(&self, state: &SceneState, id: ObjectId) -> Point {
        match self.targets[id.idx()] {
            Goal::Position(p) => p,
            Goal::StackOn(b) => state.position(b),
        }
    }
}

pub fn object_at_goal(state: &SceneState, goal: &GoalSpec, id: ObjectId, tol: f64) -> bool {
    match goal.get(id) {
        Goal::Position(p) => state.is_root(id) && state.position(id).approx_eq(p, tol),
        Goal::StackOn(b) => state.base(id) == Some(b),
    }
}

/// True iff every object satisfies its goal entry.
pub fn is_goal(state: &SceneState, goal: &GoalSpec, tol: f64) -> bool {
    state.ids().all(|i| object_at_goal(state, goal, i, tol))
}

pub fn satisfied_count(state: &SceneState, goal: &GoalSpec, tol: f64) -> usize {
    state.ids().filter(|&i| object_at_goal(state, goal, i, tol)).count()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionKind {
    Move { object: ObjectId, to: Point },
    Stack { object: ObjectId, base: ObjectId },
}

impl ActionKind {
    pub fn object(&self) -> ObjectId {
        match *self {
            ActionKind::Move { object, .. } | ActionKind::Stack { object, .. } => object,
        }
    }
}

/// A primitive with its pick and place points resolved against a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub pick: Point,
    pub place: Point,
}

impl Action {
    pub fn resolve(kind: ActionKind, state: &SceneState) -> Result<Action> {
        let n = state.len();
        let object = kind.object();
        if object.idx() >= n {
            return Err(Error::InvalidAction(format!("object {object} out of range")));
        }
        let place = match kind {
            ActionKind::Move { to, .. } => to,
            ActionKind::Stack { base, .. } => {
                if base.idx() >= n {
                    return Err(Error::InvalidAction(format!("base {base} out of range")));
                }
                state.position(base)
            }
        };
        Ok(Action { kind, pick: state.position(object), place })
    }

    pub fn object(&self) -> ObjectId {
        self.kind.object()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub total_cost: f64,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn kinds(&self) -> impl Iterator<Item = ActionKind> + '_ {
        self.actions.iter().map(|a| a.kind)
    }
}

/// Whether `action` may be executed in `state`.
///
/// `occ` must be an index of `state` that excludes the acted-on object; it is
/// only consulted for moves.
pub fn validate_action(state: &SceneState, action: &Action, occ: &OccupancyIndex) -> bool {
    let n = state.len();
    let object = action.object();
    if object.idx() >= n {
        return false;
    }
    match action.kind {
        ActionKind::Move { to, .. } => occ.is_placement_free(state.spec(object).footprint, to),
        ActionKind::Stack { base, .. } => stack_allowed(state, object, base),
    }
}

/// Stack preconditions: distinct objects, clear top, no cycle, stable pair.
pub fn stack_allowed(state: &SceneState, object: ObjectId, base: ObjectId) -> bool {
    base.idx() < state.len()
        && base != object
        && state.has_clear_top(base)
        && !state.in_sub_stack(object, base)
        && state.base(object) != Some(base)
        && state.layout.stacking.can_stack(state.category(object), state.category(base))
}

/// Validity check that builds the occupancy index it needs.
pub fn is_action_valid(state: &SceneState, kind: ActionKind) -> bool {
    let Ok(action) = Action::resolve(kind, state) else {
        return false;
    };
    match kind {
        ActionKind::Move { object, .. } => match build_index(state, Some(object), state.layout.resolution) {
            Ok(idx) => validate_action(state, &action, &idx),
            Err(_) => false,
        },
        ActionKind::Stack { object, base } => stack_allowed(state, object, base),
    }
}

/// Executes a validated action. Fails with [`Error::InvalidAction`] if the
/// action is not valid in `state` or its pick/place points are stale.
pub fn apply_action(state: &SceneState, action: &Action) -> Result<SceneState> {
    let resolved = Action::resolve(action.kind, state)?;
    let tol = state.layout.tolerance();
    if !resolved.pick.approx_eq(action.pick, tol) || !resolved.place.approx_eq(action.place, tol) {
        return Err(Error::InvalidAction(format!(
            "pick/place {} -> {} do not match state ({} -> {})",
            action.pick, action.place, resolved.pick, resolved.place
        )));
    }
    if !is_action_valid(state, action.kind) {
        return Err(Error::InvalidAction(describe(state, action.kind)));
    }
    Ok(state.apply_unchecked(action.kind))
}

fn describe(state: &SceneState, kind: ActionKind) -> String {
    match kind {
        ActionKind::Move { object, to } => {
            format!("move {} to {to} is blocked or off the table", state.spec(object).name)
        }
        ActionKind::Stack { object, base } => {
            format!("cannot stack {} on {}", state.spec(object).name, state.spec(base).name)
        }
    }
}

/// States visited and actions resolved while replaying a plan.
#[derive(Clone, Debug)]
pub struct Replay {
    /// `states[0]` is the start, `states[t + 1]` follows `actions[t]`.
    pub states: Vec<SceneState>,
    pub actions: Vec<Action>,
}

impl Replay {
    pub fn final_state(&self) -> &SceneState {
        self.states.last().expect("replay always holds the start state")
    }
}

/// Replays action kinds from `s0`, re-deriving pick and place points.
pub fn replay<I>(s0: &SceneState, kinds: I) -> Result<Replay>
where
    I: IntoIterator<Item = ActionKind>,
{
    let mut states = vec![s0.clone()];
    let mut actions = Vec::new();
    for (index, kind) in kinds.into_iter().enumerate() {
        let cur = states.last().unwrap();
        let action = Action::resolve(kind, cur).map_err(|e| Error::InvalidPlan { index, reason: e.to_string() })?;
        if !is_action_valid(cur, kind) {
            return Err(Error::InvalidPlan { index, reason: describe(cur, kind) });
        }
        let next = cur.apply_unchecked(kind);
        actions.push(action);
        states.push(next);
    }
    Ok(Replay { states, actions })
}
