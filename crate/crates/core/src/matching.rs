//! Instance correspondence between initial and target detections.
//!
//! Within each class the assignment minimizing the summed distance between
//! bounding-box centres is found with the Hungarian algorithm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: String,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Detection {
    pub fn new(class: impl Into<String>, cx: f64, cy: f64) -> Self {
        Self { class: class.into(), cx, cy, w: 1.0, h: 1.0 }
    }

    pub fn center_dist(&self, other: &Detection) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(initial index, target index)`, sorted by initial index.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Matching {
    pub fn target_of(&self, initial: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == initial).map(|p| p.1)
    }
}

/// Minimum-cost perfect assignment for a square cost matrix.
///
/// Returns `assignment[row] = column` and the total cost. O(n^3).
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    debug_assert!(cost.iter().all(|r| r.len() == n));
    // Potentials and matching are 1-based; column 0 is a virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assignment, total)
}

/// One-to-one correspondence from `initial` to `target` detections.
pub fn match_instances(initial: &[Detection], target: &[Detection]) -> Result<Matching> {
    let mut groups: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, d) in initial.iter().enumerate() {
        groups.entry(&d.class).or_default().0.push(i);
    }
    for (j, d) in target.iter().enumerate() {
        groups.entry(&d.class).or_default().1.push(j);
    }
    let mut pairs = Vec::with_capacity(initial.len());
    let mut total_cost = 0.0;
    for (class, (rows, cols)) in groups {
        if rows.len() != cols.len() {
            return Err(Error::CountMismatch { class: class.to_string(), initial: rows.len(), target: cols.len() });
        }
        let cost: Vec<Vec<f64>> =
            rows.iter().map(|&i| cols.iter().map(|&j| initial[i].center_dist(&target[j])).collect()).collect();
        let (assignment, c) = hungarian(&cost);
        total_cost += c;
        pairs.extend(assignment.iter().enumerate().map(|(r, &k)| (rows[r], cols[k])));
    }
    pairs.sort_unstable();
    Ok(Matching { pairs, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    go(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        if cost.is_empty() {
            0.0
        } else {
            best
        }
    }

    #[test]
    fn identical_centres_match_identity() {
        let ds: Vec<Detection> = (0..4).map(|i| Detection::new("mug", i as f64 * 0.2, 0.1)).collect();
        let m = match_instances(&ds, &ds).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(m.total_cost, 0.0);
    }

    #[test]
    fn swap_beats_identity() {
        let init = [Detection::new("cup", 0.0, 0.0), Detection::new("cup", 1.0, 0.0)];
        let tgt = [Detection::new("cup", 0.9, 0.0), Detection::new("cup", 0.1, 0.0)];
        let m = match_instances(&init, &tgt).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
        assert!((m.total_cost - 0.2).abs() < 1e-12);
        let identity = init[0].center_dist(&tgt[0]) + init[1].center_dist(&tgt[1]);
        assert!((identity - 1.8).abs() < 1e-12);
    }

    #[test]
    fn classes_matched_separately() {
        let init = [Detection::new("cup", 0.0, 0.0), Detection::new("apple", 0.5, 0.5)];
        let tgt = [Detection::new("apple", 0.0, 0.0), Detection::new("cup", 0.5, 0.5)];
        let m = match_instances(&init, &tgt).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn count_mismatch() {
        let init = [Detection::new("cup", 0.0, 0.0), Detection::new("cup", 1.0, 0.0)];
        let tgt = [Detection::new("cup", 0.9, 0.0)];
        assert!(matches!(match_instances(&init, &tgt), Err(Error::CountMismatch { .. })));
        let other = [Detection::new("bowl", 0.9, 0.0), Detection::new("cup", 0.9, 0.0)];
        assert!(matches!(match_instances(&init, &other), Err(Error::CountMismatch { .. })));
    }

    proptest! {
        #[test]
        fn hungarian_is_optimal(n in 1usize..=6, seed in proptest::collection::vec(0.0..1.0f64, 72)) {
            let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| seed[i * 6 + j] * 3.0).collect()).collect();
            let (assignment, total) = hungarian(&cost);
            let mut seen = vec![false; n];
            for &j in &assignment {
                prop_assert!(!seen[j]);
                seen[j] = true;
            }
            prop_assert!((total - brute_force(&cost)).abs() < 1e-9);
        }

        #[test]
        fn translation_invariant(pts in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..6),
                                 dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
            let init: Vec<_> = pts.iter().map(|p| Detection::new("x", p.0, p.1)).collect();
            let tgt: Vec<_> = pts.iter().map(|p| Detection::new("x", p.2, p.3)).collect();
            let shift = |ds: &[Detection]| -> Vec<Detection> {
                ds.iter().map(|d| Detection::new("x", d.cx + dx, d.cy + dy)).collect()
            };
            let a = match_instances(&init, &tgt).unwrap();
            let b = match_instances(&shift(&init), &shift(&tgt)).unwrap();
            prop_assert!((a.total_cost - b.total_cost).abs() < 1e-9);
            prop_assert_eq!(a.pairs, b.pairs);
        }
    }
}
