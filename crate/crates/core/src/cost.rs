//! Manipulator travel and pick-and-place costs.
//!
//! Coordinates are normalized by table width. In `Ee` mode the end
//! effector travels in straight lines over the table; in `Mb` mode only the
//! mobile base travel counts, with base poses on a rail along the long
//! table edge.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene::{replay, Action, ActionKind, Plan, Point, SceneState, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Stationary arm, end-effector travel.
    Ee,
    /// Mobile manipulator, base travel along the rail.
    Mb,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ee => "ee",
            Mode::Mb => "mb",
        }
    }

    /// Normalized table for the benchmark protocol: 1x1 stationary, 2x1 mobile.
    pub fn default_table(self) -> Table {
        match self {
            Mode::Ee => Table { w: 1.0, h: 1.0 },
            Mode::Mb => Table { w: 2.0, h: 1.0 },
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ee" => Ok(Mode::Ee),
            "mb" => Ok(Mode::Mb),
            other => Err(format!("unknown mode `{other}` (expected ee or mb)")),
        }
    }
}

pub const DEFAULT_C_PP: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostConfig {
    pub mode: Mode,
    /// Constant charged per pick-and-place.
    pub c_pp: f64,
    pub home: Point,
    pub table: Table,
    /// y coordinate of the base rail (MB only).
    pub rail_y: f64,
}

impl CostConfig {
    pub fn new(mode: Mode, table: Table) -> Self {
        let rail_y = 0.0;
        let home = match mode {
            Mode::Ee => Point::new(table.w / 2.0, 0.0),
            Mode::Mb => Point::new(0.0, rail_y),
        };
        Self { mode, c_pp: DEFAULT_C_PP, home, table, rail_y }
    }

    pub fn ee() -> Self {
        Self::new(Mode::Ee, Mode::Ee.default_table())
    }

    pub fn mb() -> Self {
        Self::new(Mode::Mb, Mode::Mb.default_table())
    }

    pub fn with_c_pp(mut self, c_pp: f64) -> Self {
        self.c_pp = c_pp;
        self
    }

    /// Base pose on the rail that serves manipulation point `p`.
    pub fn project(&self, p: Point) -> Point {
        Point::new(p.x, self.rail_y)
    }

    /// Manipulator travel between two manipulation points.
    pub fn travel(&self, a: Point, b: Point) -> f64 {
        match self.mode {
            Mode::Ee => a.dist(b),
            Mode::Mb => (self.project(a).x - self.project(b).x).abs(),
        }
    }

    /// Approach, carry and the pick-and-place constant.
    pub fn action_cost(&self, manip_at: Point, action: &Action) -> f64 {
        self.travel(manip_at, action.pick) + self.travel(action.pick, action.place) + self.c_pp
    }

    /// Cost of already-resolved actions starting with the manipulator at
    /// `start`, including the final return home.
    pub fn sequence_cost(&self, start: Point, actions: &[Action]) -> f64 {
        let mut manip = start;
        let mut total = 0.0;
        for a in actions {
            total += self.action_cost(manip, a);
            manip = a.place;
        }
        total + self.travel(manip, self.home)
    }

    /// Replays `kinds` from `s0` and returns the total cost.
    pub fn plan_cost<I>(&self, s0: &SceneState, kinds: I) -> Result<f64>
    where
        I: IntoIterator<Item = ActionKind>,
    {
        let r = replay(s0, kinds)?;
        Ok(self.sequence_cost(s0.manipulator(), &r.actions))
    }

    /// Replays `kinds` and packages the resolved actions with their cost.
    pub fn make_plan<I>(&self, s0: &SceneState, kinds: I) -> Result<Plan>
    where
        I: IntoIterator<Item = ActionKind>,
    {
        let r = replay(s0, kinds)?;
        let total_cost = self.sequence_cost(s0.manipulator(), &r.actions);
        Ok(Plan { actions: r.actions, total_cost })
    }
}

/// Free-function form of [`CostConfig::plan_cost`] for a resolved plan.
pub fn plan_cost(cfg: &CostConfig, s0: &SceneState, plan: &Plan) -> Result<f64> {
    cfg.plan_cost(s0, plan.kinds())
}
