//! Affine sections of `[n]^d` and good sets.
//!
//! A section is `F' ∩ [n]^d` for an affine `t`-flat `F'`. Its weight is
//! `|F| / n^t`. Sections are generated by closing the span of point pairs
//! (lines) and non-collinear triples (planes) and deduplicating, which is
//! exact for `d ≤ 3`. Sections with fewer than three points never break a
//! cap and are left out of the index.

use std::collections::{BTreeMap, HashSet};

use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Weight;
use crate::pipeline2d::{LowerBounds, PracticalConfig, StageRecord};
use crate::point::{GridParams, GridPoint, PointSet};
use crate::resample::{moser_tardos, CountBounds, EventSystem};
use crate::rng::GridRng;

type V3 = [i64; 3];

fn sub(p: V3, q: V3) -> V3 {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2]]
}

fn cross(u: V3, v: V3) -> V3 {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

fn dot(u: V3, v: V3) -> i64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Divides by the gcd and makes the first nonzero entry positive.
fn primitive(v: V3) -> V3 {
    let g = v[0].gcd(&v[1]).gcd(&v[2]);
    let mut w = [v[0] / g, v[1] / g, v[2] / g];
    if w.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        w = [-w[0], -w[1], -w[2]];
    }
    w
}

fn to_v3(p: &GridPoint) -> V3 {
    let c = p.coords();
    [c[0] as i64, c.get(1).copied().unwrap_or(0) as i64, c.get(2).copied().unwrap_or(0) as i64]
}

fn in_grid(v: V3, g: &GridParams) -> bool {
    let n = g.n as i64;
    (0..g.d).all(|i| v[i] >= 1 && v[i] <= n) && (g.d..3).all(|i| v[i] == 0)
}

fn from_v3(v: V3, d: usize) -> GridPoint {
    GridPoint::new(&[v[0] as i32, v[1] as i32, v[2] as i32][..d])
}

/// Identifies a flat: a line by its primitive direction and first grid
/// point, a plane by its primitive normal and offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlatKey {
    Line { dir: V3, start: V3 },
    Plane { normal: V3, offset: i64 },
}

fn line_key(p: V3, q: V3, g: &GridParams) -> FlatKey {
    let dir = primitive(sub(q, p));
    let mut start = p;
    loop {
        let prev = sub(start, dir);
        if !in_grid(prev, g) {
            break;
        }
        start = prev;
    }
    FlatKey::Line { dir, start }
}

fn line_points(dir: V3, start: V3, g: &GridParams) -> Vec<GridPoint> {
    let mut out = Vec::new();
    let mut cur = start;
    while in_grid(cur, g) {
        out.push(from_v3(cur, g.d));
        cur = [cur[0] + dir[0], cur[1] + dir[1], cur[2] + dir[2]];
    }
    out
}

/// `F' ∩ [n]^d` for one flat, with its points in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub key: FlatKey,
    pub points: Vec<GridPoint>,
    /// Dimension of the affine hull of `points`.
    pub hull_dim: usize,
    /// Parallel to a coordinate `t`-flat.
    pub axis: bool,
}

impl Section {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|F| / n^t`.
    pub fn weight(&self, g: &GridParams, t: usize) -> Weight {
        Ratio::new(self.points.len() as u64, (g.n as u64).pow(t as u32))
    }
}

fn check_dims(g: &GridParams, t: usize) -> Result<()> {
    if g.d < 2 || g.d > 3 {
        return Err(Error::invalid(format!("sections are supported for d ∈ {{2, 3}}, got {}", g.d)));
    }
    if t < 1 || t >= g.d {
        return Err(Error::invalid(format!("need 1 ≤ t ≤ d - 1, got t = {t}, d = {}", g.d)));
    }
    Ok(())
}

fn line_section(key: FlatKey, g: &GridParams, t: usize) -> Section {
    let FlatKey::Line { dir, start } = key else { unreachable!() };
    let axis = t == 1 && dir.iter().filter(|&&c| c != 0).count() == 1;
    Section { key, points: line_points(dir, start, g), hull_dim: 1, axis }
}

/// Planes for the given `(normal, offset)` keys, grouped by normal so each
/// normal costs one pass over the grid.
fn plane_sections(mut keys: Vec<(V3, i64)>, g: &GridParams, min_size: usize) -> Vec<Section> {
    keys.par_sort_unstable();
    keys.dedup();
    let grid: Vec<V3> = g.points().map(|p| to_v3(&p)).collect();
    let groups: Vec<&[(V3, i64)]> = keys.chunk_by(|a, b| a.0 == b.0).collect();
    groups
        .into_par_iter()
        .flat_map_iter(|group| {
            let normal = group[0].0;
            let lo = grid.iter().map(|&v| dot(normal, v)).min().unwrap();
            let hi = grid.iter().map(|&v| dot(normal, v)).max().unwrap();
            let mut counts = vec![0usize; (hi - lo + 1) as usize];
            for &v in &grid {
                counts[(dot(normal, v) - lo) as usize] += 1;
            }
            let mut buckets: Vec<Option<Vec<GridPoint>>> = vec![None; counts.len()];
            for &(_, e) in group {
                let c = counts[(e - lo) as usize];
                if c >= min_size {
                    buckets[(e - lo) as usize] = Some(Vec::with_capacity(c));
                }
            }
            for &v in &grid {
                if let Some(b) = &mut buckets[(dot(normal, v) - lo) as usize] {
                    b.push(from_v3(v, g.d));
                }
            }
            let axis = normal.iter().filter(|&&c| c != 0).count() == 1;
            buckets.into_iter().enumerate().filter_map(move |(i, b)| {
                b.map(|points| Section {
                    key: FlatKey::Plane { normal, offset: lo + i as i64 },
                    points,
                    hull_dim: 2,
                    axis,
                })
            })
        })
        .collect()
}

/// Every plane meeting the grid in three non-collinear points has normal
/// `u × v` for two difference vectors, so enumerating pairs of differences
/// finds all normals without touching point triples.
fn plane_normals(g: &GridParams) -> Vec<V3> {
    let r = g.n as i64 - 1;
    let diffs: Vec<V3> = (-r..=r)
        .flat_map(|x| (-r..=r).flat_map(move |y| (-r..=r).map(move |z| [x, y, z])))
        .filter(|&v| v != [0, 0, 0] && primitive(v) == v)
        .collect();
    let mut normals: Vec<V3> = (0..diffs.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let diffs = &diffs;
            (i + 1..diffs.len()).filter_map(move |j| {
                let c = cross(diffs[i], diffs[j]);
                (c != [0, 0, 0]).then(|| primitive(c))
            })
        })
        .collect();
    normals.par_sort_unstable();
    normals.dedup();
    normals
}

fn plane_sections_all(g: &GridParams, min_size: usize) -> Vec<Section> {
    let grid: Vec<V3> = g.points().map(|p| to_v3(&p)).collect();
    let n = g.n as i64;
    plane_normals(g)
        .into_par_iter()
        .map_init(
            || (Vec::<u32>::new(), Vec::<usize>::new()),
            |(counts, slot), normal| {
                let lo: i64 = normal.iter().map(|&a| a.min(a * n)).sum();
                let hi: i64 = normal.iter().map(|&a| a.max(a * n)).sum();
                counts.clear();
                counts.resize((hi - lo + 1) as usize, 0);
                for &v in &grid {
                    counts[(dot(normal, v) - lo) as usize] += 1;
                }
                slot.clear();
                slot.resize(counts.len(), usize::MAX);
                let mut buckets: Vec<(i64, Vec<V3>)> = Vec::new();
                for (i, &c) in counts.iter().enumerate() {
                    if c as usize >= min_size.max(3) {
                        slot[i] = buckets.len();
                        buckets.push((lo + i as i64, Vec::with_capacity(c as usize)));
                    }
                }
                if !buckets.is_empty() {
                    for &v in &grid {
                        let k = slot[(dot(normal, v) - lo) as usize];
                        if k != usize::MAX {
                            buckets[k].1.push(v);
                        }
                    }
                }
                let axis = normal.iter().filter(|&&c| c != 0).count() == 1;
                buckets
                    .into_iter()
                    .filter(|(_, b)| {
                        let u = sub(b[1], b[0]);
                        b[2..].iter().any(|&w| cross(u, sub(w, b[0])) != [0, 0, 0])
                    })
                    .map(|(offset, b)| Section {
                        key: FlatKey::Plane { normal, offset },
                        points: b.into_iter().map(|v| from_v3(v, g.d)).collect(),
                        hull_dim: 2,
                        axis,
                    })
                    .collect::<Vec<_>>()
            },
        )
        .flatten_iter()
        .collect()
}

fn sort_sections(v: &mut [Section]) {
    v.par_sort_unstable_by_key(|s| (s.hull_dim, s.key));
}

/// Every section with hull dimension `≤ t` and at least `min_size ≥ 3`
/// points, once each, ordered by `(hull_dim, key)`.
pub fn enumerate_sections(g: &GridParams, t: usize, min_size: usize) -> Result<Vec<Section>> {
    check_dims(g, t)?;
    if min_size < 3 {
        return Err(Error::invalid(format!("min_size must be at least 3, got {min_size}")));
    }
    let pts: Vec<V3> = g.points().map(|p| to_v3(&p)).collect();
    let line_keys: HashSet<FlatKey> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let pts = &pts;
            (i + 1..pts.len()).map(move |j| line_key(pts[i], pts[j], g))
        })
        .collect();
    let mut out: Vec<Section> = line_keys
        .into_iter()
        .map(|k| line_section(k, g, t))
        .filter(|s| s.len() >= min_size)
        .collect();
    if t == 2 {
        out.extend(plane_sections_all(g, min_size));
    }
    sort_sections(&mut out);
    Ok(out)
}

/// Sections through `x` with weight at least `alpha` (and at least two
/// points), ordered like [`enumerate_sections`].
pub fn sections_through_point(x: &GridPoint, g: &GridParams, t: usize, alpha: Weight) -> Result<Vec<Section>> {
    check_dims(g, t)?;
    if !g.contains(x) {
        return Err(Error::OutOfGrid { point: x.coords().to_vec(), n: g.n, d: g.d });
    }
    if alpha <= Ratio::from_integer(0) || alpha > Ratio::from_integer(1) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let big_n = (g.n as u64).pow(t as u32);
    let min_size = ((*alpha.numer() * big_n).div_ceil(*alpha.denom()) as usize).max(2);
    let xv = to_v3(x);
    let others: Vec<V3> = g.points().map(|p| to_v3(&p)).filter(|&v| v != xv).collect();
    let line_keys: HashSet<FlatKey> = others.iter().map(|&v| line_key(xv, v, g)).collect();
    let mut out: Vec<Section> = line_keys
        .into_iter()
        .map(|k| line_section(k, g, t))
        .filter(|s| s.len() >= min_size)
        .collect();
    if t == 2 {
        let mut plane_keys = Vec::new();
        for (i, &a) in others.iter().enumerate() {
            let u = sub(a, xv);
            for &b in &others[i + 1..] {
                let normal = cross(u, sub(b, xv));
                if normal != [0, 0, 0] {
                    let normal = primitive(normal);
                    plane_keys.push((normal, dot(normal, xv)));
                }
            }
        }
        out.extend(plane_sections(plane_keys, g, min_size));
    }
    sort_sections(&mut out);
    Ok(out)
}

/// Polynomial-tails parameters: every edge has at most `big_n` vertices and
/// at most `c α^(-c)` edges of weight `≥ α` meet any vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailParams {
    pub big_n: u64,
    pub c: u32,
}

impl TailParams {
    pub fn new(big_n: u64, c: u32) -> Result<Self> {
        if big_n == 0 || c == 0 {
            return Err(Error::invalid("tail parameters must be at least 1"));
        }
        Ok(Self { big_n, c })
    }
}

/// For every point, the number of sections (of at least two points)
/// through it of each size.
fn size_histograms(index: &SectionIndex) -> Vec<Vec<u64>> {
    let g = index.grid;
    let big_n = index.big_n() as usize;
    let mut hist = vec![vec![0u64; big_n + 1]; g.volume()];
    for s in &index.sections {
        for p in &s.points {
            hist[g.index_of(p)][s.len()] += 1;
        }
    }
    // Two-point sections are lines with exactly two grid points.
    let pts: Vec<V3> = g.points().map(|p| to_v3(&p)).collect();
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i + 1..] {
            let FlatKey::Line { dir, start } = line_key(a, b, &g) else { unreachable!() };
            let next = [start[0] + dir[0], start[1] + dir[1], start[2] + dir[2]];
            let after = [next[0] + dir[0], next[1] + dir[1], next[2] + dir[2]];
            if !in_grid(after, &g) {
                hist[g.index_of(&from_v3(a, g.d))][2] += 1;
                hist[g.index_of(&from_v3(b, g.d))][2] += 1;
            }
        }
    }
    hist
}

/// `max over x, s of |{F ∋ x : |F| ≥ s}|`, as cumulative counts per point.
fn cumulative(hist: &[Vec<u64>]) -> Vec<Vec<u64>> {
    hist.iter()
        .map(|h| {
            let mut c = h.clone();
            for s in (0..c.len() - 1).rev() {
                c[s] += c[s + 1];
            }
            c
        })
        .collect()
}

/// Smallest `C` with `|{F ∋ x : w(F) ≥ α}| ≤ C α^(-C)` for every point and
/// every `α ≥ 2/N` (one-point sections only matter for `α ≤ 1/N`, where
/// the bound `C N^C` is never tight).
pub fn fit_tail_constant(index: &SectionIndex) -> TailParams {
    let big_n = index.big_n();
    let cum = cumulative(&size_histograms(index));
    let fits = |c: u32| {
        cum.iter().all(|counts| {
            (2..=big_n as usize).all(|s| {
                let alpha = s as f64 / big_n as f64;
                counts[s] as f64 <= c as f64 * alpha.powi(-(c as i32)) * (1.0 + 1e-12)
            })
        })
    };
    let c = (1..).find(|&c| fits(c)).unwrap();
    TailParams { big_n, c }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailsProfile {
    /// `max over x, α of |{F ∋ x : w(F) ≥ α}| · α^d`.
    pub c_hat: f64,
    pub worst_point: Vec<i32>,
    pub worst_alpha: Weight,
    pub worst_count: u64,
}

pub fn tails_profile(index: &SectionIndex, alpha_grid: &[Weight]) -> Result<TailsProfile> {
    let g = index.grid;
    let big_n = index.big_n();
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    let cum = cumulative(&size_histograms(index));
    let mut best = TailsProfile {
        c_hat: -1.0,
        worst_point: Vec::new(),
        worst_alpha: alpha_grid[0],
        worst_count: 0,
    };
    for &alpha in alpha_grid {
        if alpha <= Ratio::from_integer(0) || alpha > Ratio::from_integer(1) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let s = ((*alpha.numer() * big_n).div_ceil(*alpha.denom()) as usize).max(2);
        let a = *alpha.numer() as f64 / *alpha.denom() as f64;
        for (i, counts) in cum.iter().enumerate() {
            let count = counts[s];
            let value = count as f64 * a.powi(g.d as i32);
            if value > best.c_hat {
                best = TailsProfile {
                    c_hat: value,
                    worst_point: g.point_at(i).coords().to_vec(),
                    worst_alpha: alpha,
                    worst_count: count,
                };
            }
        }
    }
    Ok(best)
}

/// All sections of at least three points, built once per `(grid, t)`.
#[derive(Clone, Debug)]
pub struct SectionIndex {
    pub grid: GridParams,
    pub t: usize,
    pub sections: Vec<Section>,
}

impl SectionIndex {
    pub fn build(g: &GridParams, t: usize) -> Result<Self> {
        Ok(Self { grid: *g, t, sections: enumerate_sections(g, t, 3)? })
    }

    /// `N = n^t`.
    pub fn big_n(&self) -> u64 {
        (self.grid.n as u64).pow(self.t as u32)
    }

    fn weight_f64(&self, s: &Section) -> f64 {
        s.len() as f64 / self.big_n() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectionClass {
    Heavy,
    Medium,
    Light,
}

/// Thresholds of an `m`-good set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodParams {
    pub m: f64,
    pub heavy_threshold: f64,
    pub light_threshold: f64,
    pub delta: f64,
    pub medium_cap: f64,
    /// `6C + 3`.
    pub light_cap: u32,
    /// No ceiling on a non-axis heavy or medium section drops below this.
    pub ceiling_floor: f64,
    pub lower_bounds: LowerBounds,
}

impl GoodParams {
    pub fn exact(m: f64, tails: &TailParams) -> Self {
        let delta = m.powf(-1.0 / 12.0);
        Self {
            m,
            heavy_threshold: m.powf(-2.0 / 3.0),
            light_threshold: m.powf(-2.0),
            delta,
            medium_cap: (1.0 + delta) * m.cbrt(),
            light_cap: 6 * tails.c + 3,
            ceiling_floor: 0.0,
            lower_bounds: LowerBounds::AllHeavy,
        }
    }

    /// Same relaxations as the planar pipeline: `δ` override, optional
    /// ceiling floor at the light cap, optional axis-only lower bounds.
    pub fn with_config(m: f64, tails: &TailParams, cfg: &PracticalConfig) -> Self {
        let mut p = Self::exact(m, tails);
        if let Some(delta) = cfg.effective_delta(m) {
            p.delta = delta;
        }
        p.medium_cap = (1.0 + p.delta) * m.cbrt();
        if let Some(cap) = cfg.light_cap_override {
            p.light_cap = cap;
        }
        if cfg.floor_ceilings {
            p.ceiling_floor = p.light_cap as f64;
        }
        p.lower_bounds = cfg.lower_bounds;
        p
    }

    /// The definition with only `δ` replaced.
    pub fn with_delta(m: f64, tails: &TailParams, delta: f64) -> Self {
        Self { delta, medium_cap: (1.0 + delta) * m.cbrt(), ..Self::exact(m, tails) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(Error::invalid(format!("m must be a finite real ≥ 1, got {}", self.m)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.light_cap < 9 {
            return Err(Error::invalid(format!("light cap must be ≥ 9, got {}", self.light_cap)));
        }
        Ok(())
    }

    pub fn class_of(&self, weight: f64) -> SectionClass {
        if weight > self.heavy_threshold {
            SectionClass::Heavy
        } else if weight > self.light_threshold {
            SectionClass::Medium
        } else {
            SectionClass::Light
        }
    }

    pub fn allowed(&self, axis: bool, weight: f64) -> (f64, f64) {
        match self.class_of(weight) {
            SectionClass::Heavy => {
                let expect = self.m * weight;
                let lo = match self.lower_bounds {
                    LowerBounds::AllHeavy => (1.0 - self.delta) * expect,
                    LowerBounds::AxisOnly if axis => (1.0 - self.delta) * expect,
                    LowerBounds::AxisOnly => 0.0,
                };
                let hi = (1.0 + self.delta) * expect;
                (lo, if axis { hi } else { hi.max(self.ceiling_floor) })
            }
            SectionClass::Medium => (0.0, self.medium_cap.max(self.ceiling_floor)),
            SectionClass::Light => (0.0, self.light_cap as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionViolation {
    pub key: FlatKey,
    pub size: usize,
    pub count: u32,
    pub allowed: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoodReport {
    pub heavy_violations: Vec<SectionViolation>,
    pub medium_violations: Vec<SectionViolation>,
    pub light_violations: Vec<SectionViolation>,
    pub sections_checked: usize,
}

impl GoodReport {
    pub fn passed(&self) -> bool {
        self.heavy_violations.is_empty()
            && self.medium_violations.is_empty()
            && self.light_violations.is_empty()
    }

    pub fn violations(&self) -> usize {
        self.heavy_violations.len() + self.medium_violations.len() + self.light_violations.len()
    }
}

fn check_grid(set: &PointSet, index: &SectionIndex) -> Result<()> {
    if set.grid() != index.grid {
        return Err(Error::invalid("point set and section index use different grids"));
    }
    Ok(())
}

/// Exact check of conditions (1)–(3) over every section.
pub fn check_good(set: &PointSet, params: &GoodParams, index: &SectionIndex) -> Result<GoodReport> {
    check_grid(set, index)?;
    params.validate()?;
    let g = index.grid;
    let mask = set.mask();
    let mut report = GoodReport { sections_checked: index.sections.len(), ..Default::default() };
    for s in &index.sections {
        let count = s.points.iter().filter(|p| mask[g.index_of(p)]).count() as u32;
        let weight = index.weight_f64(s);
        let allowed = params.allowed(s.axis, weight);
        if CountBounds::from_real(allowed.0, allowed.1).contains(count) {
            continue;
        }
        let v = SectionViolation { key: s.key, size: s.len(), count, allowed };
        match params.class_of(weight) {
            SectionClass::Heavy => report.heavy_violations.push(v),
            SectionClass::Medium => report.medium_violations.push(v),
            SectionClass::Light => report.light_violations.push(v),
        }
    }
    Ok(report)
}

/// The two facts the higher-dimensional theorem reads off a good set:
/// axis-parallel `t`-flats hold at least `(1 - δ) m` points and every
/// section holds at most `max((1 + δ) m w, (1 + δ) m^(1/3), 6C + 3)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub axis_short: Vec<SectionViolation>,
    pub over_cap: Vec<SectionViolation>,
    pub min_axis_count: Option<u32>,
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.axis_short.is_empty() && self.over_cap.is_empty()
    }
}

pub fn check_theorem_shape(set: &PointSet, params: &GoodParams, index: &SectionIndex) -> Result<ShapeReport> {
    check_grid(set, index)?;
    let g = index.grid;
    let mask = set.mask();
    let mut report = ShapeReport::default();
    let lo = (1.0 - params.delta) * params.m;
    for s in &index.sections {
        let count = s.points.iter().filter(|p| mask[g.index_of(p)]).count() as u32;
        let w = index.weight_f64(s);
        let hi = ((1.0 + params.delta) * params.m * w)
            .max((1.0 + params.delta) * params.m.cbrt())
            .max(params.light_cap as f64);
        let bounds = CountBounds::from_real(if s.axis { lo } else { 0.0 }, hi);
        let v = || SectionViolation { key: s.key, size: s.len(), count, allowed: (lo, hi) };
        if s.axis {
            report.min_axis_count = Some(report.min_axis_count.map_or(count, |c| c.min(count)));
            if count < bounds.lo {
                report.axis_short.push(v());
            }
        }
        if count > bounds.hi {
            report.over_cap.push(v());
        }
    }
    Ok(report)
}

/// `m_(1) = m`, `m_(i+1) = m_(i)^3`, `m_(r) ≤ N`.
pub fn hd_schedule(m: f64, big_n: u64) -> Result<Vec<f64>> {
    if !(m >= 1.0) || m > big_n as f64 {
        return Err(Error::invalid(format!("need 1 ≤ m ≤ N = {big_n}, got m = {m}")));
    }
    let mut stages = vec![m];
    loop {
        let last = *stages.last().unwrap();
        let next = last.powi(3);
        if next > big_n as f64 || next <= last {
            return Ok(stages);
        }
        stages.push(next);
    }
}

fn hd_stage(
    s0: &PointSet,
    m0: f64,
    params: &GoodParams,
    index: &SectionIndex,
    cfg: &PracticalConfig,
    rng: &mut GridRng,
) -> Result<(PointSet, StageRecord)> {
    let g = index.grid;
    let points: Vec<GridPoint> = s0.iter().copied().collect();
    let mut var_of = vec![u32::MAX; g.volume()];
    for (i, p) in points.iter().enumerate() {
        var_of[g.index_of(p)] = i as u32;
    }
    let mut system = EventSystem::new(points.len());
    for s in &index.sections {
        let members: Vec<u32> =
            s.points.iter().map(|p| var_of[g.index_of(p)]).filter(|&v| v != u32::MAX).collect();
        let (lo, hi) = params.allowed(s.axis, index.weight_f64(s));
        let bounds = CountBounds::from_real(lo, hi);
        if bounds.lo > 0 || members.len() as u32 > bounds.hi {
            system.push(members, bounds);
        }
    }
    let unsat = system.unsatisfiable().len();
    if unsat > 0 {
        return Err(Error::BudgetExhausted { stage: 0, resamples: 0, unresolved: unsat });
    }
    let outcome = moser_tardos(&system, params.m / m0, cfg.resample_budget, rng);
    if !outcome.converged() {
        return Err(Error::BudgetExhausted {
            stage: 0,
            resamples: outcome.resamples,
            unresolved: outcome.unresolved.len(),
        });
    }
    let kept = points.iter().zip(&outcome.state).filter(|(_, &k)| k).map(|(p, _)| *p);
    let set = PointSet::from_points(g, kept)?;
    let record = StageRecord {
        m0,
        m: params.m,
        events: system.len(),
        resamples: outcome.resamples,
        size: set.len(),
    };
    Ok((set, record))
}

/// Staged subsampling of `[n]^d` down to an `m`-good set (under `cfg`).
pub fn run_hd_pipeline(
    index: &SectionIndex,
    m: f64,
    tails: &TailParams,
    cfg: &PracticalConfig,
    rng: &mut GridRng,
) -> Result<(PointSet, Vec<StageRecord>)> {
    cfg.validate()?;
    let stages = hd_schedule(m, index.big_n())?;
    let mut set = PointSet::full(index.grid);
    let mut m0 = index.big_n() as f64;
    let mut records = Vec::new();
    for (i, &mi) in stages.iter().enumerate().rev() {
        let params = GoodParams::with_config(mi, tails, cfg);
        params.validate()?;
        let (next, rec) = hd_stage(&set, m0, &params, index, cfg, rng).map_err(|e| match e {
            Error::BudgetExhausted { resamples, unresolved, .. } => {
                Error::BudgetExhausted { stage: i + 1, resamples, unresolved }
            }
            other => other,
        })?;
        records.push(rec);
        set = next;
        m0 = mi;
    }
    Ok((set, records))
}

/// Number of sections per size, for summaries.
pub fn size_census(index: &SectionIndex) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for s in &index.sections {
        *out.entry(s.len()).or_insert(0) += 1;
    }
    out
}
