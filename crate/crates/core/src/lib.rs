//! Dependency-aware rearrangement planning for tabletop scenes with
//! stackable objects.

pub mod astar;
pub mod bench;
pub mod cost;
pub mod error;
pub mod expansion;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod mcts;
pub mod refine;
pub mod scene;
pub mod scene_gen;
pub mod svg;

pub use cost::{CostConfig, Mode};
pub use error::{Error, Result};
pub use scene::{Action, ActionKind, Goal, GoalSpec, ObjectId, Plan, Point, SceneState};
