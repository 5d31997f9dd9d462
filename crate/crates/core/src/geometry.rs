//! Occupancy grid over the table with a summed-area table, so that "is this
//! footprint placement free" costs four lookups.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scene::{Footprint, ObjectId, Point, SceneState, Table};

/// Snapping slack for rasterization so that edges landing exactly on a cell
/// boundary do not leak into the neighbouring cell through rounding noise.
const SNAP: f64 = 1e-6;

/// Cells added around a footprint when checking a placement.
pub const CLEARANCE_CELLS: i64 = 1;

/// Half-open cell rectangle `[c0, c1) x [r0, r1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRect {
    pub c0: i64,
    pub r0: i64,
    pub c1: i64,
    pub r1: i64,
}

impl CellRect {
    /// Cells whose centres lie inside `footprint` centred at `at`.
    ///
    /// The true footprint sticks out of this rectangle by less than half a
    /// cell per side, so rasters one clear cell apart never overlap.
    pub fn of(footprint: Footprint, at: Point, resolution: u32) -> CellRect {
        let res = resolution as f64;
        let lo = |v: f64| (v * res - 0.5 - SNAP).ceil() as i64;
        let hi = |v: f64| (v * res - 0.5 + SNAP).floor() as i64 + 1;
        CellRect {
            c0: lo(at.x - footprint.w / 2.0),
            r0: lo(at.y - footprint.d / 2.0),
            c1: hi(at.x + footprint.w / 2.0),
            r1: hi(at.y + footprint.d / 2.0),
        }
    }

    pub fn inflate(self, by: i64) -> CellRect {
        CellRect { c0: self.c0 - by, r0: self.r0 - by, c1: self.c1 + by, r1: self.r1 + by }
    }

    pub fn clip(self, cols: usize, rows: usize) -> CellRect {
        CellRect {
            c0: self.c0.clamp(0, cols as i64),
            r0: self.r0.clamp(0, rows as i64),
            c1: self.c1.clamp(0, cols as i64),
            r1: self.r1.clamp(0, rows as i64),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.c0 >= self.c1 || self.r0 >= self.r1
    }

    pub fn intersects(&self, other: &CellRect) -> bool {
        self.c0 < other.c1 && other.c0 < self.c1 && self.r0 < other.r1 && other.r0 < self.r1
    }

    pub fn cells(&self) -> i64 {
        if self.is_empty() {
            0
        } else {
            (self.c1 - self.c0) * (self.r1 - self.r0)
        }
    }
}

/// Boolean occupancy grid plus its integral image.
#[derive(Clone, Debug)]
pub struct OccupancyIndex {
    table: Table,
    resolution: u32,
    cols: usize,
    rows: usize,
    grid: Vec<bool>,
    /// `(rows + 1) x (cols + 1)`, zero first row and column.
    sat: Vec<u32>,
}

impl OccupancyIndex {
    pub fn empty(table: Table, resolution: u32) -> Self {
        let cols = (table.w * resolution as f64).round() as usize;
        let rows = (table.h * resolution as f64).round() as usize;
        Self { table, resolution, cols, rows, grid: vec![false; cols * rows], sat: vec![0; (cols + 1) * (rows + 1)] }
    }

    /// Builds an index from an explicit row-major grid.
    pub fn from_grid(table: Table, resolution: u32, grid: Vec<bool>) -> Self {
        let mut idx = Self::empty(table, resolution);
        assert_eq!(grid.len(), idx.grid.len(), "grid size does not match table");
        idx.grid = grid;
        idx.rebuild_sat();
        idx
    }

    fn rebuild_sat(&mut self) {
        let w = self.cols + 1;
        for r in 0..self.rows {
            let mut row_sum = 0u32;
            for c in 0..self.cols {
                row_sum += self.grid[r * self.cols + c] as u32;
                self.sat[(r + 1) * w + c + 1] = self.sat[r * w + c + 1] + row_sum;
            }
        }
    }

    /// Marks `rect` occupied and refreshes the summed-area table.
    pub fn mark(&mut self, rect: CellRect) {
        self.fill(rect);
        self.rebuild_sat();
    }

    fn fill(&mut self, rect: CellRect) {
        let rect = rect.clip(self.cols, self.rows);
        for r in rect.r0..rect.r1 {
            let row = r as usize * self.cols;
            self.grid[row + rect.c0 as usize..row + rect.c1 as usize].fill(true);
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn table(&self) -> Table {
        self.table
    }

    pub fn is_occupied(&self, c: usize, r: usize) -> bool {
        self.grid[r * self.cols + c]
    }

    /// Occupied cells in rows `0..=r` and columns `0..=c`.
    pub fn sat(&self, r: usize, c: usize) -> u32 {
        self.sat[(r + 1) * (self.cols + 1) + c + 1]
    }

    /// Occupied cells inside `rect` (clipped to the grid).
    pub fn count(&self, rect: CellRect) -> u32 {
        let rect = rect.clip(self.cols, self.rows);
        if rect.is_empty() {
            return 0;
        }
        let w = self.cols + 1;
        let (c0, r0, c1, r1) = (rect.c0 as usize, rect.r0 as usize, rect.c1 as usize, rect.r1 as usize);
        self.sat[r1 * w + c1] + self.sat[r0 * w + c0] - self.sat[r0 * w + c1] - self.sat[r1 * w + c0]
    }

    pub fn occupied_cells(&self) -> u32 {
        self.sat[self.sat.len() - 1]
    }

    /// True iff the footprint lies on the table and its window, inflated by
    /// the clearance margin, covers no occupied cell.
    pub fn is_placement_free(&self, footprint: Footprint, at: Point) -> bool {
        if !self.table.fits(footprint, at) {
            return false;
        }
        let window = CellRect::of(footprint, at, self.resolution).inflate(CLEARANCE_CELLS);
        self.count(window) == 0
    }

    pub fn cell_center(&self, c: usize, r: usize) -> Point {
        let res = self.resolution as f64;
        Point::new((c as f64 + 0.5) / res, (r as f64 + 0.5) / res)
    }

    /// Every cell-centred placement of `footprint` that is free.
    pub fn free_positions(&self, footprint: Footprint) -> Vec<Point> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.cell_center(c, r);
                if self.is_placement_free(footprint, p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Marks the footprint of every root except `exclude`'s stack.
///
/// If `exclude` is a stacked object nothing is removed, since only roots
/// occupy the table.
pub fn build_index(state: &SceneState, exclude: Option<ObjectId>, resolution: u32) -> Result<OccupancyIndex> {
    let layout = state.layout();
    for spec in &layout.objects {
        let res = resolution as f64;
        if spec.footprint.w * res < 1.0 - SNAP || spec.footprint.d * res < 1.0 - SNAP {
            return Err(Error::ResolutionTooCoarse { resolution, w: spec.footprint.w, d: spec.footprint.d });
        }
    }
    let mut idx = OccupancyIndex::empty(layout.table, resolution);
    for root in state.roots() {
        if Some(root) == exclude {
            continue;
        }
        idx.fill(CellRect::of(state.spec(root).footprint, state.position(root), resolution));
    }
    idx.rebuild_sat();
    Ok(idx)
}

/// Up to `k` distinct free cell-centred placements, chosen at random.
///
/// Random probing is tried first; if it cannot find enough positions the
/// full free set is enumerated and sampled without replacement.
pub fn sample_free_positions<R: Rng + ?Sized>(
    idx: &OccupancyIndex,
    footprint: Footprint,
    k: usize,
    rng: &mut R,
) -> Vec<Point> {
    if k == 0 || idx.cols == 0 || idx.rows == 0 {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(k);
    for _ in 0..16 * k {
        let c = rng.gen_range(0..idx.cols);
        let r = rng.gen_range(0..idx.rows);
        if !seen.insert((c, r)) {
            continue;
        }
        let p = idx.cell_center(c, r);
        if idx.is_placement_free(footprint, p) {
            out.push(p);
            if out.len() == k {
                return out;
            }
        }
    }
    let mut rest: Vec<Point> = idx.free_positions(footprint).into_iter().filter(|p| !out.contains(p)).collect();
    let need = (k - out.len()).min(rest.len());
    for i in 0..need {
        let j = rng.gen_range(i..rest.len());
        rest.swap(i, j);
    }
    out.extend_from_slice(&rest[..need]);
    out
}
