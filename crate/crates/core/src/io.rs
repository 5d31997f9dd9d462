//! Versioned JSON documents for scenes, plans and detections.
//!
//! Objects are referred to by name in every document.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cost::{CostConfig, Mode};
use crate::error::{Error, Result};
use crate::matching::{Detection, Matching};
use crate::scene::{
    ActionKind, Category, Footprint, Goal, GoalSpec, Layout, ObjectId, ObjectSpec, Plan, Point, SceneState, Table,
    DEFAULT_RESOLUTION,
};

pub const SCHEMA: u32 = 1;

fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA {
        return Err(Error::InvalidScene(format!("unsupported schema {schema}, expected {SCHEMA}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDoc {
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDoc {
    pub id: String,
    pub category: Category,
    pub w: f64,
    pub d: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalDoc {
    Position { id: String, x: f64, y: f64 },
    On { id: String, on: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub schema: u32,
    pub table: TableDoc,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_pp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manipulator: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    pub objects: Vec<ObjectDoc>,
    /// `[top, base]` pairs.
    #[serde(default)]
    pub stacks: Vec<(String, String)>,
    pub goal: Vec<GoalDoc>,
}

/// A planning problem: start state, goal and cost model.
#[derive(Clone, Debug)]
pub struct Instance {
    pub state: SceneState,
    pub goal: GoalSpec,
    pub cost: CostConfig,
}

fn lookup(layout: &Layout, name: &str) -> Result<ObjectId> {
    layout.find(name).ok_or_else(|| Error::InvalidScene(format!("unknown object `{name}`")))
}

impl SceneDoc {
    pub fn into_instance(self) -> Result<Instance> {
        check_schema(self.schema)?;
        let table = Table { w: self.table.w, h: self.table.h };
        if !(table.w > 0.0 && table.h > 0.0) {
            return Err(Error::InvalidScene("table dimensions must be positive".into()));
        }
        let mut names = std::collections::HashSet::new();
        for o in &self.objects {
            if !names.insert(o.id.as_str()) {
                return Err(Error::InvalidScene(format!("duplicate object id `{}`", o.id)));
            }
            if !(o.w > 0.0 && o.d > 0.0) {
                return Err(Error::InvalidScene(format!("object `{}` has a non-positive footprint", o.id)));
            }
        }
        let mut layout = Layout::new(
            table,
            self.objects
                .iter()
                .map(|o| ObjectSpec {
                    name: o.id.clone(),
                    category: o.category,
                    footprint: Footprint { w: o.w, d: o.d },
                })
                .collect(),
        );
        if let Some(r) = self.resolution {
            if r == 0 {
                return Err(Error::InvalidScene("resolution must be positive".into()));
            }
            layout.resolution = r;
        }
        let mut cost = CostConfig::new(self.mode, table);
        if let Some(c) = self.c_pp {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidScene("c_pp must be non-negative".into()));
            }
            cost = cost.with_c_pp(c);
        }
        let stacks = self
            .stacks
            .iter()
            .map(|(t, b)| Ok((lookup(&layout, t)?, lookup(&layout, b)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut targets: Vec<Option<Goal>> = vec![None; layout.objects.len()];
        for g in &self.goal {
            let (name, goal) = match g {
                GoalDoc::Position { id, x, y } => (id, Goal::Position(Point::new(*x, *y))),
                GoalDoc::On { id, on } => (id, Goal::StackOn(lookup(&layout, on)?)),
            };
            let i = lookup(&layout, name)?;
            if targets[i.idx()].replace(goal).is_some() {
                return Err(Error::InvalidScene(format!("object `{name}` has two goals")));
            }
        }
        let targets = targets
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.ok_or_else(|| Error::InvalidScene(format!("object `{}` has no goal", layout.objects[i].name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let positions = self.objects.iter().map(|o| Point::new(o.x, o.y)).collect();
        let layout = Arc::new(layout);
        let manipulator = self.manipulator.unwrap_or(cost.home);
        let state = SceneState::new(layout, positions, &stacks, manipulator)?;
        let goal = GoalSpec::new(targets);
        goal.goal_state(&state)?;
        Ok(Instance { state, goal, cost })
    }

    pub fn from_instance(inst: &Instance) -> SceneDoc {
        let s = &inst.state;
        let layout = s.layout();
        let name = |i: ObjectId| layout.objects[i.idx()].name.clone();
        let default_cost = CostConfig::new(inst.cost.mode, layout.table);
        SceneDoc {
            schema: SCHEMA,
            table: TableDoc { w: layout.table.w, h: layout.table.h },
            mode: inst.cost.mode,
            c_pp: (inst.cost.c_pp != default_cost.c_pp).then_some(inst.cost.c_pp),
            manipulator: Some(s.manipulator()),
            resolution: (layout.resolution != DEFAULT_RESOLUTION).then_some(layout.resolution),
            objects: s
                .ids()
                .map(|i| {
                    let spec = s.spec(i);
                    let p = s.position(i);
                    ObjectDoc {
                        id: spec.name.clone(),
                        category: spec.category,
                        w: spec.footprint.w,
                        d: spec.footprint.d,
                        x: p.x,
                        y: p.y,
                    }
                })
                .collect(),
            stacks: s.stacks().into_iter().map(|(t, b)| (name(t), name(b))).collect(),
            goal: s
                .ids()
                .map(|i| match inst.goal.get(i) {
                    Goal::Position(p) => GoalDoc::Position { id: name(i), x: p.x, y: p.y },
                    Goal::StackOn(b) => GoalDoc::On { id: name(i), on: name(b) },
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActionDoc {
    Move {
        object: String,
        to: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pick: Option<Point>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        place: Option<Point>,
    },
    Stack {
        object: String,
        base: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pick: Option<Point>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        place: Option<Point>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    pub schema: u32,
    pub actions: Vec<ActionDoc>,
    #[serde(default)]
    pub total_cost: Option<f64>,
}

impl PlanDoc {
    pub fn from_plan(plan: &Plan, state: &SceneState) -> PlanDoc {
        let name = |i: ObjectId| state.spec(i).name.clone();
        PlanDoc {
            schema: SCHEMA,
            actions: plan
                .actions
                .iter()
                .map(|a| match a.kind {
                    ActionKind::Move { object, to } => {
                        ActionDoc::Move { object: name(object), to, pick: Some(a.pick), place: Some(a.place) }
                    }
                    ActionKind::Stack { object, base } => ActionDoc::Stack {
                        object: name(object),
                        base: name(base),
                        pick: Some(a.pick),
                        place: Some(a.place),
                    },
                })
                .collect(),
            total_cost: Some(plan.total_cost),
        }
    }

    /// Action kinds with names resolved against `state`'s layout. Recorded
    /// picks, places and cost are ignored; replay recomputes them.
    pub fn kinds(&self, state: &SceneState) -> Result<Vec<ActionKind>> {
        check_schema(self.schema)?;
        let layout = state.layout();
        self.actions
            .iter()
            .map(|a| {
                Ok(match a {
                    ActionDoc::Move { object, to, .. } => ActionKind::Move { object: lookup(layout, object)?, to: *to },
                    ActionDoc::Stack { object, base, .. } => {
                        ActionKind::Stack { object: lookup(layout, object)?, base: lookup(layout, base)? }
                    }
                })
            })
            .collect()
    }

    /// Replays the document from the instance start and rebuilds the plan.
    pub fn to_plan(&self, inst: &Instance) -> Result<Plan> {
        inst.cost.make_plan(&inst.state, self.kinds(&inst.state)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionsDoc {
    pub schema: u32,
    pub initial: Vec<Detection>,
    pub target: Vec<Detection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingDoc {
    pub schema: u32,
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl From<Matching> for MatchingDoc {
    fn from(m: Matching) -> Self {
        MatchingDoc { schema: SCHEMA, pairs: m.pairs, total_cost: m.total_cost }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value))?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    read_json::<SceneDoc>(path)?.into_instance()
}

pub fn instance_from_str(text: &str) -> Result<Instance> {
    parse::<SceneDoc>(text)?.into_instance()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "schema": 1,
        "table": {"w": 1.0, "h": 1.0},
        "mode": "ee",
        "objects": [
            {"id": "bowl", "category": "secondary_base", "w": 0.2, "d": 0.2, "x": 0.3, "y": 0.3},
            {"id": "spoon", "category": "low_mass", "w": 0.1, "d": 0.1, "x": 0.3, "y": 0.3},
            {"id": "box", "category": "primary_base", "w": 0.2, "d": 0.2, "x": 0.7, "y": 0.7}
        ],
        "stacks": [["spoon", "bowl"]],
        "goal": [
            {"id": "bowl", "on": "box"},
            {"id": "spoon", "x": 0.3, "y": 0.7},
            {"id": "box", "x": 0.7, "y": 0.7}
        ]
    }"#;

    #[test]
    fn scene_round_trip() {
        let inst = instance_from_str(SCENE).unwrap();
        assert_eq!(inst.state.len(), 3);
        assert_eq!(inst.state.base(ObjectId(1)), Some(ObjectId(0)));
        assert_eq!(inst.goal.get(ObjectId(0)), Goal::StackOn(ObjectId(2)));
        assert_eq!(inst.state.manipulator(), inst.cost.home);
        let doc = SceneDoc::from_instance(&inst);
        let again = parse::<SceneDoc>(&to_json(&doc)).unwrap().into_instance().unwrap();
        assert_eq!(again.state.positions(), inst.state.positions());
        assert_eq!(again.goal, inst.goal);
        assert_eq!(SceneDoc::from_instance(&again), doc);
    }

    #[test]
    fn plan_round_trip() {
        let inst = instance_from_str(SCENE).unwrap();
        let kinds = [
            ActionKind::Move { object: ObjectId(1), to: Point::new(0.3, 0.7) },
            ActionKind::Stack { object: ObjectId(0), base: ObjectId(2) },
        ];
        let plan = inst.cost.make_plan(&inst.state, kinds).unwrap();
        let doc = PlanDoc::from_plan(&plan, &inst.state);
        let text = to_json(&doc);
        assert!(text.contains("\"kind\": \"stack\""));
        let back = parse::<PlanDoc>(&text).unwrap().to_plan(&inst).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn malformed_inputs() {
        assert!(instance_from_str("{").is_err());
        assert!(instance_from_str(&SCENE.replace("\"schema\": 1", "\"schema\": 2")).is_err());
        assert!(instance_from_str(&SCENE.replace("\"on\": \"box\"", "\"on\": \"cup\"")).is_err());
        assert!(instance_from_str(
            &SCENE.replace("{\"id\": \"box\", \"x\": 0.7, \"y\": 0.7}", "{\"id\": \"spoon\", \"x\": 0.7, \"y\": 0.7}")
        )
        .is_err());
        // Goal outside the table.
        assert!(instance_from_str(&SCENE.replace("\"x\": 0.3, \"y\": 0.7", "\"x\": 1.3, \"y\": 0.7")).is_err());
    }

    #[test]
    fn detections_parse() {
        let d: DetectionsDoc = parse(
            r#"{"schema":1,"initial":[{"class":"cup","cx":0,"cy":0,"w":1,"h":1}],
                "target":[{"class":"cup","cx":1,"cy":0,"w":1,"h":1}]}"#,
        )
        .unwrap();
        let m = crate::matching::match_instances(&d.initial, &d.target).unwrap();
        let doc = MatchingDoc::from(m);
        assert_eq!(doc.pairs, vec![(0, 0)]);
        assert_eq!(doc.total_cost, 1.0);
    }
}
