//! Ground truth: exact per-line counts by pair bucketing, exhaustive search
//! on tiny grids, and empirical spread.

use std::collections::HashMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Line, Weight};
use crate::point::{GridParams, GridPoint, PointSet};
use crate::regularizer::BipartiteGraph;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCount {
    pub line: Line,
    pub count: u32,
    pub cap: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub k: u32,
    /// Heaviest line (first in canonical order among ties).
    pub max_line: Option<(Line, u32)>,
    /// Lines with more than `k` points.
    pub violations: Vec<LineCount>,
    /// Non-axis lines over `k (w + 0.01)` and any row or column `≠ k`.
    pub relaxed_ok: bool,
    pub exact_ok: bool,
}

/// Counts every line through at least two points of `set` by bucketing all
/// pairs on their canonical line: a line holding `c` points collects
/// `c (c - 1) / 2` pairs.
pub fn line_counts_by_pairs(set: &PointSet) -> Result<Vec<(Line, u32)>> {
    if set.grid().d != 2 {
        return Err(Error::invalid("line counting needs a planar set"));
    }
    let pts: Vec<GridPoint> = set.iter().copied().collect();
    let mut pairs: HashMap<Line, u64> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            *pairs.entry(geometry::canonicalize_line(p, q)?).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(Line, u32)> = pairs
        .into_iter()
        .map(|(line, m)| {
            // c (c - 1) / 2 = m
            let c = (1 + ((1 + 8 * m) as f64).sqrt().round() as u64) / 2;
            debug_assert_eq!(c * (c - 1) / 2, m);
            (line, c as u32)
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn count_violations(set: &PointSet, k: u32) -> Result<ViolationReport> {
    let counts = line_counts_by_pairs(set)?;
    let n = set.grid().n;
    let mut max_line: Option<(Line, u32)> = None;
    let mut violations = Vec::new();
    let mut relaxed_ok = true;
    for &(line, count) in &counts {
        if max_line.is_none_or(|(_, c)| count > c) {
            max_line = Some((line, count));
        }
        if count > k {
            violations.push(LineCount { line, count, cap: k });
        }
        if !line.is_axis() {
            // count ≤ k (grid / n + 1/100)
            let grid = geometry::line_count(&line, n) as u64;
            relaxed_ok &= count as u64 * 100 * n as u64 <= k as u64 * (100 * grid + n as u64);
        }
    }
    relaxed_ok &= (0..2).all(|axis| set.axis_counts(axis).iter().all(|&c| c == k));
    Ok(ViolationReport { k, max_line, exact_ok: violations.is_empty(), violations, relaxed_ok })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxSet {
    pub size: usize,
    pub witness: PointSet,
    pub nodes: u64,
}

/// Largest `S ⊆ [n]^2` with at most `k` points on every line, by
/// backtracking over points in lexicographic order. Prunes on line
/// counts and on `|S| + Σ over remaining rows min(k, free cells)`.
pub fn brute_force_max_set(g: &GridParams, k: u32, budget: u64) -> Result<MaxSet> {
    if g.d != 2 || g.n > 5 {
        return Err(Error::invalid(format!("exhaustive search needs d = 2 and n ≤ 5, got n = {}", g.n)));
    }
    let n = g.n as usize;
    let cells: Vec<GridPoint> = g.points().collect();
    // Only lines that can exceed k matter.
    let lines: Vec<Line> = geometry::enumerate_lines(g, Ratio::new(2, g.n as u64))?
        .into_iter()
        .filter(|s| s.count > k)
        .map(|s| s.line)
        .collect();
    let lines_of: Vec<Vec<usize>> =
        cells.iter().map(|p| (0..lines.len()).filter(|&l| lines[l].contains(p)).collect()).collect();

    struct Search<'a> {
        n: usize,
        k: u32,
        lines_of: &'a [Vec<usize>],
        load: Vec<u32>,
        chosen: Vec<bool>,
        best: Vec<bool>,
        best_size: usize,
        nodes: u64,
        budget: u64,
    }

    impl Search<'_> {
        fn bound(&self, next: usize, size: usize) -> usize {
            // next row is partially decided
            let (row, col) = (next / self.n, next % self.n);
            if row >= self.n {
                return size;
            }
            let placed_in_row = (0..col).filter(|&c| self.chosen[row * self.n + c]).count();
            let cur = (self.k as usize).min(placed_in_row + self.n - col) - placed_in_row.min(self.k as usize);
            size + cur + (self.n - row - 1) * (self.k as usize).min(self.n)
        }

        fn go(&mut self, next: usize, size: usize) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExhausted { stage: 0, resamples: self.nodes, unresolved: 1 });
            }
            if size > self.best_size {
                self.best_size = size;
                self.best = self.chosen.clone();
            }
            if next == self.chosen.len() || self.bound(next, size) <= self.best_size {
                return Ok(());
            }
            if self.lines_of[next].iter().all(|&l| self.load[l] < self.k) {
                self.chosen[next] = true;
                for &l in &self.lines_of[next] {
                    self.load[l] += 1;
                }
                self.go(next + 1, size + 1)?;
                for &l in &self.lines_of[next] {
                    self.load[l] -= 1;
                }
                self.chosen[next] = false;
            }
            self.go(next + 1, size)
        }
    }

    let mut s = Search {
        n,
        k,
        lines_of: &lines_of,
        load: vec![0; lines.len()],
        chosen: vec![false; cells.len()],
        best: vec![false; cells.len()],
        best_size: 0,
        nodes: 0,
        budget,
    };
    s.go(0, 0)?;
    let witness = PointSet::from_mask(*g, &s.best);
    Ok(MaxSet { size: s.best_size, witness, nodes: s.nodes })
}

/// Whether `graph` has a spanning subgraph with every degree equal to `k`,
/// by choosing `k` neighbours row by row under column capacities.
pub fn brute_force_k_regular(graph: &BipartiteGraph, k: u32) -> Result<bool> {
    let n = graph.n();
    if n > 4 {
        return Err(Error::invalid(format!("exhaustive search needs n ≤ 4, got {n}")));
    }
    if k > n {
        return Ok(false);
    }
    fn rows(graph: &BipartiteGraph, k: u32, i: u32, col_load: &mut Vec<u32>) -> bool {
        let n = graph.n();
        if i > n {
            return col_load[1..].iter().all(|&c| c == k);
        }
        let nbrs: Vec<u32> = (1..=n).filter(|&j| graph.has_edge(i, j)).collect();
        (0u32..1 << nbrs.len()).filter(|m| m.count_ones() == k).any(|mask| {
            let pick: Vec<u32> =
                nbrs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &j)| j).collect();
            if pick.iter().any(|&j| col_load[j as usize] >= k) {
                return false;
            }
            pick.iter().for_each(|&j| col_load[j as usize] += 1);
            let ok = rows(graph, k, i + 1, col_load);
            pick.iter().for_each(|&j| col_load[j as usize] -= 1);
            ok
        })
    }
    Ok(rows(graph, k, 1, &mut vec![0; n as usize + 1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub p_target: Weight,
    /// Largest inclusion frequency over one-point test sets.
    pub singleton_max: f64,
    /// Largest inclusion frequency over two-point test sets.
    pub pair_max: f64,
    /// `max over T of freq(T ⊆ S)^(1/|T|)`.
    pub normalized_max: f64,
    pub trials: usize,
    pub failed_trials: usize,
    pub note: String,
}

impl SpreadEstimate {
    /// Singletons within `tol · p` and pairs within `(tol · p)^2`.
    pub fn within(&self, tol: f64) -> bool {
        let p = *self.p_target.numer() as f64 / *self.p_target.denom() as f64;
        self.singleton_max <= tol * p && self.pair_max <= (tol * p).powi(2)
    }
}

/// Empirical inclusion frequencies of the test sets over `trials` samples
/// drawn as `sampler(trial)`. Samples that fail are counted and skipped.
pub fn estimate_spread<F>(sampler: F, p_target: Weight, trials: usize, family: &[PointSet]) -> Result<SpreadEstimate>
where
    F: Fn(u64) -> Result<PointSet> + Sync,
{
    if trials < 100 {
        return Err(Error::invalid(format!("spread estimates need at least 100 trials, got {trials}")));
    }
    if family.iter().any(|t| t.is_empty() || t.len() > 2) {
        return Err(Error::invalid("test sets must have one or two points"));
    }
    let hits: Vec<Option<Vec<bool>>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            sampler(trial).ok().map(|s| family.iter().map(|t| t.is_subset(&s)).collect())
        })
        .collect();
    let ok: Vec<&Vec<bool>> = hits.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::BudgetExhausted { stage: 0, resamples: trials as u64, unresolved: trials });
    }
    let freq = |i: usize| ok.iter().filter(|h| h[i]).count() as f64 / ok.len() as f64;
    let mut est = SpreadEstimate {
        p_target,
        singleton_max: 0.0,
        pair_max: 0.0,
        normalized_max: 0.0,
        trials: ok.len(),
        failed_trials: trials - ok.len(),
        note: format!(
            "empirical frequencies over {} samples; one standard error ≈ {:.3} at frequency 1/2",
            ok.len(),
            0.5 / (ok.len() as f64).sqrt()
        ),
    };
    for (i, t) in family.iter().enumerate() {
        let f = freq(i);
        if t.len() == 1 {
            est.singleton_max = est.singleton_max.max(f);
        } else {
            est.pair_max = est.pair_max.max(f);
        }
        est.normalized_max = est.normalized_max.max(f.powf(1.0 / t.len() as f64));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::{k_regular_subgraph, KRegular};

    fn plane(n: u32) -> GridParams {
        GridParams::plane(n).unwrap()
    }

    #[test]
    fn full_grid_meets_k_equals_n() {
        for n in 2..=9 {
            let r = count_violations(&PointSet::full(plane(n)), n).unwrap();
            assert!(r.exact_ok);
            assert_eq!(r.max_line.unwrap().1, n);
        }
    }

    #[test]
    fn collinear_points_are_reported() {
        let g = plane(10);
        let pts = (1..=4).map(|t| GridPoint::xy(t, 2 * t));
        let r = count_violations(&PointSet::from_points(g, pts).unwrap(), 3).unwrap();
        assert!(!r.exact_ok);
        let line = geometry::canonicalize_line(&GridPoint::xy(1, 2), &GridPoint::xy(2, 4)).unwrap();
        assert_eq!(r.violations, vec![LineCount { line, count: 4, cap: 3 }]);
    }

    #[test]
    fn empty_set_is_vacuous() {
        let r = count_violations(&PointSet::empty(plane(5)), 1).unwrap();
        assert!(r.exact_ok && r.max_line.is_none());
    }

    #[test]
    fn tiny_grid_optima() {
        let best = |n, k| brute_force_max_set(&plane(n), k, 10_000_000).unwrap();
        assert_eq!(best(2, 2).size, 4);
        assert_eq!(best(3, 3).size, 9);
        assert_eq!(best(3, 2).size, 6);
        assert_eq!(best(3, 1).size, 1);
        assert_eq!(best(4, 2).size, 8);
        for (n, k) in [(3, 2), (4, 2)] {
            let m = best(n, k);
            assert_eq!(m.witness.len(), m.size);
            assert!(count_violations(&m.witness, k).unwrap().exact_ok);
        }
    }

    #[test]
    fn backtracking_respects_budget() {
        assert!(brute_force_max_set(&plane(5), 2, 10).unwrap_err().is_budget());
        assert!(brute_force_max_set(&plane(6), 2, 10).is_err());
    }

    #[test]
    fn k_regular_examples() {
        let complete = BipartiteGraph::new(3, (1..=3).flat_map(|i| (1..=3).map(move |j| (i, j)))).unwrap();
        for k in 0..=3 {
            assert!(brute_force_k_regular(&complete, k).unwrap());
        }
        let matching = BipartiteGraph::new(3, (1..=3).map(|i| (i, i))).unwrap();
        assert!(brute_force_k_regular(&matching, 1).unwrap());
        assert!(!brute_force_k_regular(&matching, 2).unwrap());
    }

    #[test]
    fn flow_matches_exhaustive_search_on_small_graphs() {
        let cells: Vec<(u32, u32)> = (1..=3).flat_map(|i| (1..=3).map(move |j| (i, j))).collect();
        for mask in 0u32..512 {
            let g = BipartiteGraph::new(3, cells.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e))
                .unwrap();
            for k in 1..=3 {
                let flow = matches!(k_regular_subgraph(&g, k).unwrap(), KRegular::Subgraph(_));
                assert_eq!(flow, brute_force_k_regular(&g, k).unwrap(), "mask {mask:#b} k {k}");
            }
        }
    }

    #[test]
    fn spread_detects_planted_point() {
        let g = plane(8);
        let x = GridPoint::xy(3, 3);
        let fam = vec![PointSet::from_points(g, [x]).unwrap()];
        let full = estimate_spread(|_| Ok(PointSet::full(g)), Ratio::new(9, 8), 100, &fam).unwrap();
        assert_eq!(full.singleton_max, 1.0);
        assert!(full.within(1.0));
        let planted = estimate_spread(|_| Ok(PointSet::from_points(g, [x]).unwrap()), Ratio::new(1, 4), 100, &fam)
            .unwrap();
        assert!(!planted.within(1.2));
        assert!(estimate_spread(|_| Ok(PointSet::full(g)), Ratio::new(1, 2), 99, &fam).is_err());
    }
}
