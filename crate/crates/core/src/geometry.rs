//! Exact integer geometry of lines in the plane grid `[n]^2`.
//!
//! A line is stored as the locus `a*x + b*y = c` with `gcd(a, b) = 1` and
//! `(a > 0) || (a == 0 && b > 0)`, which makes line identity hashable and
//! independent of the points used to build it. Weights are exact rationals
//! `count / n`; nothing here touches floating point except the threshold
//! helpers, which compare integer counts against real cut-offs.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{GridParams, GridPoint, PointSet};

/// Exact weight `|[n]^2 ∩ L| / n`.
pub type Weight = Ratio<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Line {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Line {
    /// Normalizes `a*x + b*y = c`; `None` when `a = b = 0`.
    pub fn new(a: i64, b: i64, c: i64) -> Option<Self> {
        if a == 0 && b == 0 {
            return None;
        }
        let g = a.gcd(&b);
        // Non-primitive normals only describe a lattice line when g | c.
        if c % g != 0 {
            return None;
        }
        let (mut a, mut b, mut c) = (a / g, b / g, c / g);
        if a < 0 || (a == 0 && b < 0) {
            a = -a;
            b = -b;
            c = -c;
        }
        Some(Self { a, b, c })
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        self.a * p.x() as i64 + self.b * p.y() as i64 == self.c
    }

    /// Rows `y = const` (in this crate's convention `a = 0`) and columns `x = const`.
    pub fn is_axis(&self) -> bool {
        self.a == 0 || self.b == 0
    }

    /// Primitive direction vector, oriented so the lexicographic order of
    /// points along the line is increasing.
    pub fn direction(&self) -> Direction {
        Direction::normalized(self.b, -self.a)
    }
}

/// A primitive direction `(dx, dy)` with `dx > 0`, or `dx = 0, dy = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub dx: i64,
    pub dy: i64,
}

impl Direction {
    fn normalized(dx: i64, dy: i64) -> Self {
        let g = dx.gcd(&dy).max(1);
        let (dx, dy) = (dx / g, dy / g);
        if dx < 0 || (dx == 0 && dy < 0) {
            Self { dx: -dx, dy: -dy }
        } else {
            Self { dx, dy }
        }
    }

    /// Largest absolute component; lines in this direction hold at most
    /// `(n - 1) / span + 1` grid points.
    pub fn span(&self) -> i64 {
        self.dx.abs().max(self.dy.abs())
    }

    pub fn max_points(&self, n: u32) -> u32 {
        ((n as i64 - 1) / self.span()) as u32 + 1
    }

    /// Canonical line in this direction through `p`.
    pub fn line_through(&self, p: &GridPoint) -> Line {
        let (a, b) = if self.dy > 0 || (self.dy == 0 && self.dx < 0) {
            (self.dy, -self.dx)
        } else {
            (-self.dy, self.dx)
        };
        Line { a, b, c: a * p.x() as i64 + b * p.y() as i64 }
    }

    /// Steps from `p` that stay inside `[n]^2` going backwards and forwards.
    fn reach(&self, p: &GridPoint, n: u32) -> (i64, i64) {
        let n = n as i64;
        let steps = |coord: i64, delta: i64| -> (i64, i64) {
            match delta.cmp(&0) {
                Ordering::Greater => ((coord - 1) / delta, (n - coord) / delta),
                Ordering::Less => ((n - coord) / -delta, (coord - 1) / -delta),
                Ordering::Equal => (i64::MAX, i64::MAX),
            }
        };
        let (bx, fx) = steps(p.x() as i64, self.dx);
        let (by, fy) = steps(p.y() as i64, self.dy);
        (bx.min(by), fx.min(fy))
    }

    /// Number of grid points on the line through `p` in this direction.
    pub fn count_through(&self, p: &GridPoint, n: u32) -> u32 {
        let (back, fwd) = self.reach(p, n);
        (back + fwd + 1) as u32
    }

    /// True when `p` is the lexicographically smallest grid point of its line.
    pub fn is_line_start(&self, p: &GridPoint, n: u32) -> bool {
        self.reach(p, n).0 == 0
    }
}

/// All primitive directions of lines that can meet `[n]^2` in at least
/// `min_count` points (at least 2), sorted.
pub fn directions(n: u32, min_count: u32) -> Vec<Direction> {
    let min_count = min_count.max(2) as i64;
    let n = n as i64;
    if min_count > n {
        return Vec::new();
    }
    let max_span = (n - 1) / (min_count - 1);
    let mut out = Vec::new();
    for dx in 0..=max_span {
        for dy in -max_span..=max_span {
            if dx == 0 && dy != 1 {
                continue;
            }
            if dx.gcd(&dy) == 1 {
                out.push(Direction { dx, dy });
            }
        }
    }
    out.sort();
    out
}

/// A line of 𝓛 together with its exact grid count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineStats {
    pub line: Line,
    pub count: u32,
    pub n: u32,
}

impl LineStats {
    pub fn weight(&self) -> Weight {
        Ratio::new(self.count as u64, self.n as u64)
    }

    pub fn weight_f64(&self) -> f64 {
        self.count as f64 / self.n as f64
    }
}

fn check_plane(g: &GridParams) -> Result<()> {
    if g.d != 2 {
        return Err(Error::invalid(format!("line geometry needs d = 2, got d = {}", g.d)));
    }
    Ok(())
}

/// The canonical line through two distinct points; symmetric in its arguments.
pub fn canonicalize_line(p: &GridPoint, q: &GridPoint) -> Result<Line> {
    if p == q {
        return Err(Error::IdenticalPoints(p.coords().to_vec()));
    }
    let dir = Direction::normalized((q.x() - p.x()) as i64, (q.y() - p.y()) as i64);
    Ok(dir.line_through(p))
}

/// `(g, s, t)` with `a*s + b*t = g = gcd(a, b)`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, s, t) = ext_gcd(b, a.rem_euclid(b));
        (g, t, s - a.div_euclid(b) * t)
    }
}

/// Parameter range `[lo, hi]` of `base + t * step` landing in `[1, n]`.
fn param_range(base: i64, step: i64, n: i64) -> Option<(i64, i64)> {
    match step.cmp(&0) {
        Ordering::Equal => (1 <= base && base <= n).then_some((i64::MIN, i64::MAX)),
        Ordering::Greater => Some((Integer::div_ceil(&(1 - base), &step), Integer::div_floor(&(n - base), &step))),
        Ordering::Less => {
            let s = -step;
            Some((Integer::div_ceil(&(base - n), &s), Integer::div_floor(&(base - 1), &s)))
        }
    }
}

fn solve_line(line: &Line, n: u32) -> Option<(GridPoint, Direction, i64)> {
    let n = n as i64;
    let (g, s, t) = ext_gcd(line.a, line.b);
    debug_assert_eq!(g, 1);
    let (x0, y0) = (s * line.c, t * line.c);
    // solutions: (x0 + b*k, y0 - a*k)
    let (lx, hx) = param_range(x0, line.b, n)?;
    let (ly, hy) = param_range(y0, -line.a, n)?;
    let (lo, hi) = (lx.max(ly), hx.min(hy));
    if lo > hi {
        return None;
    }
    let p_lo = (x0 + line.b * lo, y0 - line.a * lo);
    let p_hi = (x0 + line.b * hi, y0 - line.a * hi);
    let start = p_lo.min(p_hi);
    Some((
        GridPoint::xy(start.0 as i32, start.1 as i32),
        line.direction(),
        hi - lo + 1,
    ))
}

/// Number of grid points on `line` without materializing them.
pub fn line_count(line: &Line, n: u32) -> u32 {
    solve_line(line, n).map_or(0, |(_, _, k)| k as u32)
}

/// Grid points on `line`, sorted lexicographically. Walks from the first
/// point along the primitive direction, so the cost is linear in the output.
pub fn points_on_line(line: &Line, g: &GridParams) -> Vec<GridPoint> {
    let Some((start, dir, count)) = solve_line(line, g.n) else {
        return Vec::new();
    };
    (0..count)
        .map(|k| {
            GridPoint::xy(
                (start.x() as i64 + k * dir.dx) as i32,
                (start.y() as i64 + k * dir.dy) as i32,
            )
        })
        .collect()
}

pub fn line_stats(line: &Line, n: u32) -> LineStats {
    LineStats { line: *line, count: line_count(line, n), n }
}

/// Smallest count whose weight reaches `alpha`, i.e. `ceil(alpha * n)`.
fn min_count_for(alpha: Weight, n: u32) -> u32 {
    let num = *alpha.numer() * n as u64;
    num.div_ceil(*alpha.denom()) as u32
}

/// Lines of 𝓛 through `p` with weight at least `alpha`.
pub fn heavy_lines_through(p: &GridPoint, g: &GridParams, alpha: Weight) -> Result<Vec<LineStats>> {
    check_plane(g)?;
    if alpha <= Ratio::from_integer(0) || alpha > Ratio::from_integer(1) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !g.contains(p) {
        return Err(Error::OutOfGrid { point: p.coords().to_vec(), n: g.n, d: g.d });
    }
    let min_count = min_count_for(alpha, g.n).max(2);
    let mut out: Vec<LineStats> = directions(g.n, min_count)
        .into_iter()
        .filter_map(|dir| {
            let count = dir.count_through(p, g.n);
            (count >= min_count).then(|| LineStats { line: dir.line_through(p), count, n: g.n })
        })
        .collect();
    out.sort_by_key(|s| s.line);
    Ok(out)
}

/// Every line of 𝓛 with weight at least `min_weight`, once each, sorted by
/// canonical form.
pub fn enumerate_lines(g: &GridParams, min_weight: Weight) -> Result<Vec<LineStats>> {
    check_plane(g)?;
    let min_count = min_count_for(min_weight, g.n).max(2);
    let mut out = Vec::new();
    for dir in directions(g.n, min_count) {
        for_each_line_start(&dir, g.n, |p| {
            let count = dir.count_through(&p, g.n);
            if count >= min_count {
                out.push(LineStats { line: dir.line_through(&p), count, n: g.n });
            }
        });
    }
    out.sort_by_key(|s| s.line);
    Ok(out)
}

/// Calls `f` with the first grid point of every line in direction `dir`.
pub fn for_each_line_start(dir: &Direction, n: u32, mut f: impl FnMut(GridPoint)) {
    let n_i = n as i64;
    for x in 1..=n_i {
        if x - dir.dx >= 1 {
            // interior column band: the predecessor leaves the grid through y
            let ys: Box<dyn Iterator<Item = i64>> = match dir.dy.cmp(&0) {
                Ordering::Greater => Box::new(1..=dir.dy.min(n_i)),
                Ordering::Less => Box::new((n_i + dir.dy + 1).max(1)..=n_i),
                Ordering::Equal => Box::new(std::iter::empty()),
            };
            for y in ys {
                f(GridPoint::xy(x as i32, y as i32));
            }
        } else {
            for y in 1..=n_i {
                let p = GridPoint::xy(x as i32, y as i32);
                if dir.is_line_start(&p, n) {
                    f(p);
                }
            }
        }
    }
}

/// `(line, |S ∩ L|)` for every line carrying at least `min_hits` points of
/// `S` (at least 2), found by sweeping each direction with a dense counter.
/// Only directions able to hold `min_hits` points are visited.
pub fn line_hits(set: &PointSet, min_hits: u32) -> Vec<(Line, u32)> {
    let n = set.grid().n;
    let min_hits = min_hits.max(2);
    let pts: Vec<GridPoint> = set.iter().copied().collect();
    if (pts.len() as u32) < min_hits {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut counter: HashMap<i64, u32> = HashMap::new();
    for dir in directions(n, min_hits) {
        counter.clear();
        for p in &pts {
            *counter.entry(dir.line_through(p).c).or_insert(0) += 1;
        }
        let sample = dir.line_through(&GridPoint::xy(1, 1));
        out.extend(
            counter
                .iter()
                .filter(|(_, &k)| k >= min_hits)
                .map(|(&c, &k)| (Line { a: sample.a, b: sample.b, c }, k)),
        );
    }
    out.sort();
    out
}

/// Calls `f(stats, |S ∩ L|)` for every line with at least `min_points` grid
/// points, direction by direction. Each direction costs one pass over the
/// grid with dense counters, so this suits checks that need every heavy line
/// including those `S` misses entirely.
pub fn for_each_line_count(set: &PointSet, min_points: u32, mut f: impl FnMut(LineStats, u32)) {
    let n = set.grid().n;
    let n_i = n as i64;
    let mask = set.mask();
    let mut grid = Vec::new();
    let mut hits = Vec::new();
    for dir in directions(n, min_points.max(2)) {
        let proto = dir.line_through(&GridPoint::xy(1, 1));
        let (a, b) = (proto.a, proto.b);
        let corners = [a + b, a + b * n_i, a * n_i + b, (a + b) * n_i];
        let c_min = *corners.iter().min().unwrap();
        let c_max = *corners.iter().max().unwrap();
        let len = (c_max - c_min + 1) as usize;
        grid.clear();
        grid.resize(len, 0u32);
        hits.clear();
        hits.resize(len, 0u32);
        let mut idx = 0;
        for x in 1..=n_i {
            for y in 1..=n_i {
                let slot = (a * x + b * y - c_min) as usize;
                grid[slot] += 1;
                hits[slot] += mask[idx] as u32;
                idx += 1;
            }
        }
        for (slot, (&count, &hit)) in grid.iter().zip(&hits).enumerate() {
            if count >= min_points {
                let line = Line { a, b, c: c_min + slot as i64 };
                f(LineStats { line, count, n }, hit);
            }
        }
    }
}

/// `|S ∩ L|` by walking the line.
pub fn count_on_line(set: &PointSet, line: &Line) -> u32 {
    points_on_line(line, &set.grid())
        .iter()
        .filter(|p| set.contains(p))
        .count() as u32
}
