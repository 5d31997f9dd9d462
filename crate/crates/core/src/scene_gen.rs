//! Seeded random start/goal scene pairs at a given table density.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::CellRect;
use crate::geometry::{sample_free_positions, OccupancyIndex};
use crate::scene::{Category, Footprint, Goal, GoalSpec, Layout, ObjectId, ObjectSpec, Point, SceneState, Table};

pub const MAX_ATTEMPTS: usize = 10_000;

/// Probability that an object is put on a base when stacks are requested.
const STACK_PROBABILITY: f64 = 0.3;

#[derive(Clone, Debug)]
pub struct ScenePair {
    pub initial: SceneState,
    pub target: SceneState,
    pub goal: GoalSpec,
}

impl ScenePair {
    pub fn with_manipulator(mut self, at: Point) -> Self {
        self.initial = self.initial.with_manipulator(at);
        self.target = self.target.with_manipulator(at);
        self
    }
}

/// Side of each of `n` equal squares covering fraction `phi` of the table.
pub fn object_side(n: usize, phi: f64, table: Table) -> f64 {
    (phi * table.area() / n as f64).sqrt()
}

/// Random stack forest under the category rules: `(top, base)` edges.
fn sample_stacks<R: Rng>(layout: &Layout, rng: &mut R) -> Vec<(ObjectId, ObjectId)> {
    let n = layout.objects.len();
    let mut base_of: Vec<Option<usize>> = vec![None; n];
    let mut top_of: Vec<Option<usize>> = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &top in &order {
        if !rng.gen_bool(STACK_PROBABILITY) {
            continue;
        }
        let cat = layout.objects[top].category;
        let bases: Vec<usize> = (0..n)
            .filter(|&b| {
                if b == top || top_of[b].is_some() || !layout.stacking.can_stack(cat, layout.objects[b].category) {
                    return false;
                }
                // Reject cycles: walk down from b.
                let mut cur = Some(b);
                while let Some(c) = cur {
                    if c == top {
                        return false;
                    }
                    cur = base_of[c];
                }
                true
            })
            .collect();
        if let Some(&b) = bases.choose(rng) {
            base_of[top] = Some(b);
            top_of[b] = Some(top);
        }
    }
    (0..n).filter_map(|t| base_of[t].map(|b| (ObjectId(t), ObjectId(b)))).collect()
}

/// One arrangement: placements for the roots, restarting on a dead end.
fn sample_scene<R: Rng>(
    layout: &Arc<Layout>,
    with_stacks: bool,
    manipulator: Point,
    rng: &mut R,
) -> Result<SceneState> {
    let n = layout.objects.len();
    let res = layout.resolution;
    for _ in 0..MAX_ATTEMPTS {
        let stacks = if with_stacks { sample_stacks(layout, rng) } else { Vec::new() };
        let mut is_root = vec![true; n];
        for &(top, _) in &stacks {
            is_root[top.idx()] = false;
        }
        let mut roots: Vec<usize> = (0..n).filter(|&i| is_root[i]).collect();
        roots.shuffle(rng);
        let mut positions = vec![Point::default(); n];
        let mut grid = OccupancyIndex::empty(layout.table, res);
        let mut ok = true;
        for &i in &roots {
            let fp = layout.objects[i].footprint;
            let Some(&p) = sample_free_positions(&grid, fp, 1, rng).first() else {
                ok = false;
                break;
            };
            positions[i] = p;
            grid.mark(CellRect::of(fp, p, res));
        }
        if ok {
            return SceneState::new(layout.clone(), positions, &stacks, manipulator);
        }
    }
    Err(Error::GenerationFailed { attempts: MAX_ATTEMPTS })
}

/// Generates a start scene and a goal for `n` equal squares at density
/// `phi`. The manipulator starts at the middle of the near table edge.
pub fn generate_pair(n: usize, phi: f64, table: Table, with_stacks: bool, seed: u64) -> Result<ScenePair> {
    if n == 0 || !(phi > 0.0 && phi < 1.0) {
        return Err(Error::InvalidScene(format!("need n >= 1 and 0 < phi < 1, got n={n}, phi={phi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = object_side(n, phi, table);
    let objects = (0..n)
        .map(|i| ObjectSpec {
            name: format!("o{i}"),
            category: Category::ALL[rng.gen_range(0..Category::ALL.len())],
            footprint: Footprint { w: side, d: side },
        })
        .collect();
    let layout = Arc::new(Layout::new(table, objects));
    let manipulator = Point::new(table.w / 2.0, 0.0);
    let initial = sample_scene(&layout, with_stacks, manipulator, &mut rng)?;
    let target = sample_scene(&layout, with_stacks, manipulator, &mut rng)?;
    let goal = GoalSpec::new(
        target
            .ids()
            .map(|i| match target.base(i) {
                Some(b) => Goal::StackOn(b),
                None => Goal::Position(target.position(i)),
            })
            .collect(),
    );
    Ok(ScenePair { initial, target, goal })
}
