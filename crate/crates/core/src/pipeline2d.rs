//! Staged subsampling of the plane grid.
//!
//! Starting from the full grid, each stage keeps every point of the previous
//! set with probability `p = m / m0` and then repairs violated lines by
//! resampling. A set is *m-nice* when
//!
//! 1. every heavy line (`w > m^(-2/3)`) holds `(1 ± δ) m w` points,
//! 2. every medium line (`m^(-2) < w ≤ m^(-2/3)`) holds at most `(1 + δ) m^(1/3)`,
//! 3. every light line (`w ≤ m^(-2)`) holds at most `C = 14`,
//! 4. every rectangle `I × J` with `|I|, |J| ≥ n/10` holds `(1 ± δ) |I||J| m / n`,
//!
//! with `δ = m^(-1/12)`. Those tolerances only bite for astronomically large
//! `m`, so [`PracticalConfig`] carries the relaxations used at desk scale.
//! The checker is exact either way: it reports precisely which lines and
//! rectangles break the parameters it was given.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Line};
use crate::point::{GridParams, GridPoint, PointSet};
use crate::resample::{moser_tardos, CountBounds, EventSystem};
use crate::rng::{rng_from_seed, GridRng};

/// `C` in condition (3).
pub const THEORY_LIGHT_CAP: u32 = 14;
/// `ε` in `m_(1) = (1 + ε) k`.
pub const THEORY_EPS: f64 = 0.005;
/// Lower end of the regime where the existence proof applies.
pub const THEORY_K: f64 = 1e36;
/// Default heavy-line tolerance used whenever `m ≤ 10^4`.
pub const DESK_DELTA: f64 = 0.25;

/// Which heavy lines carry the lower half of condition (1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowerBounds {
    /// Every heavy line, as in the definition.
    AllHeavy,
    /// Rows and columns only. Downstream steps (regularization and the
    /// final line bounds) never read the lower bound of any other line.
    AxisOnly,
}

/// Resolved thresholds for one value of `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiceParams {
    pub m: f64,
    pub heavy_threshold: f64,
    pub light_threshold: f64,
    pub delta: f64,
    /// Ceiling for medium lines, `(1 + δ) m^(1/3)`.
    pub medium_cap: f64,
    pub light_cap: u32,
    /// No ceiling on a non-axis heavy or medium line drops below this
    /// (0 in the definition).
    pub ceiling_floor: f64,
    pub lower_bounds: LowerBounds,
}

impl NiceParams {
    /// The definition verbatim.
    pub fn exact(m: f64) -> Self {
        let delta = m.powf(-1.0 / 12.0);
        Self {
            m,
            heavy_threshold: m.powf(-2.0 / 3.0),
            light_threshold: m.powf(-2.0),
            delta,
            medium_cap: (1.0 + delta) * m.cbrt(),
            light_cap: THEORY_LIGHT_CAP,
            ceiling_floor: 0.0,
            lower_bounds: LowerBounds::AllHeavy,
        }
    }

    /// Thresholds after applying the relaxations in `cfg`.
    pub fn with_config(m: f64, cfg: &PracticalConfig) -> Self {
        let mut p = Self::exact(m);
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

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(Error::invalid(format!("m must be a finite real ≥ 1, got {}", self.m)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn class_of(&self, weight: f64) -> LineClass {
        if weight > self.heavy_threshold {
            LineClass::Heavy
        } else if weight > self.light_threshold {
            LineClass::Medium
        } else {
            LineClass::Light
        }
    }

    /// Allowed real interval for a line of the given class and weight.
    pub fn allowed(&self, line: &Line, weight: f64) -> (f64, f64) {
        let (lo, hi) = match self.class_of(weight) {
            LineClass::Heavy => {
                let expect = self.m * weight;
                let lo = match self.lower_bounds {
                    LowerBounds::AllHeavy => (1.0 - self.delta) * expect,
                    LowerBounds::AxisOnly if line.is_axis() => (1.0 - self.delta) * expect,
                    LowerBounds::AxisOnly => 0.0,
                };
                let hi = (1.0 + self.delta) * expect;
                (lo, if line.is_axis() { hi } else { hi.max(self.ceiling_floor) })
            }
            LineClass::Medium => (0.0, self.medium_cap.max(self.ceiling_floor)),
            LineClass::Light => (0.0, self.light_cap as f64),
        };
        (lo, hi)
    }

    fn bounds(&self, line: &Line, weight: f64) -> CountBounds {
        let (lo, hi) = self.allowed(line, weight);
        CountBounds::from_real(lo, hi)
    }

    /// Smallest ceiling over medium and light lines; lines carrying no more
    /// points than this can never violate (2) or (3).
    fn min_upper_cap(&self) -> u32 {
        let medium = (self.medium_cap.max(self.ceiling_floor) + 1e-9).floor().max(0.0) as u32;
        medium.min(self.light_cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineClass {
    Heavy,
    Medium,
    Light,
}

/// Desk-scale knobs. The defaults reproduce the definition except where the
/// definition cannot be met at small `m` (see [`PracticalConfig::desk`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PracticalConfig {
    pub delta_override: Option<f64>,
    pub light_cap_override: Option<u32>,
    /// Raise every heavy and medium ceiling to at least the light cap `C`.
    /// In the proof's regime those ceilings are already far above `C`.
    pub floor_ceilings: bool,
    pub lower_bounds: LowerBounds,
    /// Random rectangle pairs tested for condition (4), on top of all
    /// contiguous-interval pairs.
    pub quasi_sample_pairs: usize,
    pub resample_budget: u64,
    pub retry_budget: u32,
    pub rng_seed: u64,
}

impl Default for PracticalConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl PracticalConfig {
    /// The definition verbatim; only attainable for very large `m`.
    pub fn strict(seed: u64) -> Self {
        Self {
            delta_override: None,
            light_cap_override: None,
            floor_ceilings: false,
            lower_bounds: LowerBounds::AllHeavy,
            quasi_sample_pairs: 256,
            resample_budget: 200_000,
            retry_budget: 20,
            rng_seed: seed,
        }
    }

    /// Desk-scale defaults: heavy tolerance 0.25, lower bounds on rows and
    /// columns only, no ceiling below `C`.
    pub fn desk(seed: u64) -> Self {
        Self {
            delta_override: None,
            floor_ceilings: true,
            lower_bounds: LowerBounds::AxisOnly,
            ..Self::strict(seed)
        }
    }

    /// `δ` used at `m`: the override, else 0.25 for `m ≤ 10^4`, else `None`
    /// (the definition's `m^(-1/12)`).
    pub fn effective_delta(&self, m: f64) -> Option<f64> {
        match self.delta_override {
            Some(d) => Some(d),
            None if self.lower_bounds == LowerBounds::AxisOnly && m <= 1e4 => Some(DESK_DELTA),
            None => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resample_budget == 0 || self.retry_budget == 0 {
            return Err(Error::invalid("budgets must be at least 1"));
        }
        if let Some(d) = self.delta_override {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::invalid(format!("delta override must lie in (0, 1), got {d}")));
            }
        }
        if let Some(c) = self.light_cap_override {
            if c < 2 {
                return Err(Error::invalid(format!("light cap override must be ≥ 2, got {c}")));
            }
        }
        Ok(())
    }
}

/// `m_(1) < ... < m_(r)` with `m_(1) = (1 + ε) k`, `m_(i+1) = m_(i)^3`, `m_(r) ≤ n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stages: Vec<f64>,
    pub k: u32,
    pub n: u32,
    pub eps: f64,
    /// Recorded for reports only.
    pub k_theory: f64,
}

impl StageSchedule {
    pub fn r(&self) -> usize {
        self.stages.len()
    }

    pub fn first(&self) -> f64 {
        self.stages[0]
    }

    /// Whether `k ≤ 0.9 n` as the existence statement assumes.
    pub fn k_within_range(&self) -> bool {
        self.k as f64 <= 0.9 * self.n as f64
    }
}

pub fn build_schedule(k: u32, n: u32, eps: f64) -> Result<StageSchedule> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("need 2 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be a finite real ≥ 0, got {eps}")));
    }
    let first = (1.0 + eps) * k as f64;
    if first > n as f64 {
        return Err(Error::invalid(format!(
            "(1 + eps) k = {first} exceeds n = {n}"
        )));
    }
    let mut stages = vec![first];
    loop {
        let next = stages.last().unwrap().powi(3);
        if next > n as f64 || next <= *stages.last().unwrap() {
            break;
        }
        stages.push(next);
    }
    Ok(StageSchedule { stages, k, n, eps, k_theory: THEORY_K })
}

/// One violated line or rectangle with the interval it should have met.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineViolation {
    pub line: Line,
    pub count: u32,
    pub allowed: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiViolation {
    pub i_size: usize,
    pub j_size: usize,
    pub count: u32,
    pub allowed: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NiceReport {
    pub heavy_violations: Vec<LineViolation>,
    pub medium_violations: Vec<LineViolation>,
    pub light_violations: Vec<LineViolation>,
    pub quasi_violations: Vec<QuasiViolation>,
    /// Rectangle pairs examined for condition (4).
    pub quasi_pairs_checked: usize,
}

impl NiceReport {
    pub fn passed(&self) -> bool {
        self.lines_passed() && self.quasi_violations.is_empty()
    }

    /// Conditions (1)–(3) only.
    pub fn lines_passed(&self) -> bool {
        self.heavy_violations.is_empty()
            && self.medium_violations.is_empty()
            && self.light_violations.is_empty()
    }
}

fn check_set_plane(set: &PointSet) -> Result<GridParams> {
    let g = set.grid();
    if g.d != 2 {
        return Err(Error::invalid(format!("expected a planar point set, got d = {}", g.d)));
    }
    Ok(g)
}

/// Smallest grid count a line needs before it can break a condition:
/// heavy lines carry a lower bound, other lines only a ceiling.
fn min_relevant_points(params: &NiceParams, n: u32) -> u32 {
    let heavy_min = (params.heavy_threshold * n as f64 + 1e-9).floor() as u32 + 1;
    heavy_min.min(params.min_upper_cap() + 1).max(2)
}

/// Checks conditions (1)–(3) exactly and condition (4) on all
/// contiguous-interval pairs plus `cfg.quasi_sample_pairs` random pairs.
pub fn check_nice(
    set: &PointSet,
    params: &NiceParams,
    cfg: &PracticalConfig,
    rng: &mut GridRng,
) -> Result<NiceReport> {
    let g = check_set_plane(set)?;
    params.validate()?;
    let mut report = check_nice_lines(set, params)?;
    let (violations, checked) = check_quasirandom(set, g, params, cfg.quasi_sample_pairs, rng);
    report.quasi_violations = violations;
    report.quasi_pairs_checked = checked;
    Ok(report)
}

/// Conditions (1)–(3) only.
pub fn check_nice_lines(set: &PointSet, params: &NiceParams) -> Result<NiceReport> {
    let g = check_set_plane(set)?;
    let mut report = NiceReport::default();
    geometry::for_each_line_count(set, min_relevant_points(params, g.n), |stats, count| {
        let weight = stats.weight_f64();
        let allowed = params.allowed(&stats.line, weight);
        if CountBounds::from_real(allowed.0, allowed.1).contains(count) {
            return;
        }
        let v = LineViolation { line: stats.line, count, allowed };
        match params.class_of(weight) {
            LineClass::Heavy => report.heavy_violations.push(v),
            LineClass::Medium => report.medium_violations.push(v),
            LineClass::Light => report.light_violations.push(v),
        }
    });
    for list in [
        &mut report.heavy_violations,
        &mut report.medium_violations,
        &mut report.light_violations,
    ] {
        list.sort_by_key(|v| v.line);
    }
    Ok(report)
}

/// 2D prefix sums over the membership mask.
struct Prefix {
    n: usize,
    sums: Vec<u32>,
}

impl Prefix {
    fn new(set: &PointSet) -> Self {
        let n = set.grid().n as usize;
        let mut sums = vec![0u32; (n + 1) * (n + 1)];
        let mask = set.mask();
        for x in 1..=n {
            for y in 1..=n {
                let here = mask[(x - 1) * n + (y - 1)] as u32;
                sums[x * (n + 1) + y] =
                    here + sums[(x - 1) * (n + 1) + y] + sums[x * (n + 1) + y - 1]
                        - sums[(x - 1) * (n + 1) + y - 1];
            }
        }
        Self { n, sums }
    }

    /// Points in `[x0, x1] × [y0, y1]` (1-based, inclusive).
    fn rect(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> u32 {
        let w = self.n + 1;
        self.sums[x1 * w + y1] + self.sums[(x0 - 1) * w + y0 - 1]
            - self.sums[(x0 - 1) * w + y1]
            - self.sums[x1 * w + y0 - 1]
    }
}

fn check_quasirandom(
    set: &PointSet,
    g: GridParams,
    params: &NiceParams,
    samples: usize,
    rng: &mut GridRng,
) -> (Vec<QuasiViolation>, usize) {
    let n = g.n as usize;
    let min_size = n.div_ceil(10).max(1);
    let density = params.m / n as f64;
    let allowed = |a: usize, b: usize| {
        let expect = (a * b) as f64 * density;
        ((1.0 - params.delta) * expect, (1.0 + params.delta) * expect)
    };
    let mut violations = Vec::new();
    let mut checked = 0usize;

    let prefix = Prefix::new(set);
    let intervals: Vec<(usize, usize)> = (1..=n)
        .flat_map(|lo| (lo + min_size - 1..=n).map(move |hi| (lo, hi)))
        .collect();
    for &(x0, x1) in &intervals {
        for &(y0, y1) in &intervals {
            checked += 1;
            let count = prefix.rect(x0, x1, y0, y1);
            let (a, b) = (x1 - x0 + 1, y1 - y0 + 1);
            let bounds = allowed(a, b);
            if !CountBounds::from_real(bounds.0, bounds.1).contains(count) {
                violations.push(QuasiViolation { i_size: a, j_size: b, count, allowed: bounds });
            }
        }
    }

    let mask = set.mask();
    let coords: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        let a = rng.gen_range(min_size..=n);
        let b = rng.gen_range(min_size..=n);
        let rows: Vec<usize> = coords.choose_multiple(rng, a).copied().collect();
        let cols: Vec<usize> = coords.choose_multiple(rng, b).copied().collect();
        let count = rows
            .iter()
            .map(|&x| cols.iter().filter(|&&y| mask[x * n + y]).count() as u32)
            .sum::<u32>();
        checked += 1;
        let bounds = allowed(a, b);
        if !CountBounds::from_real(bounds.0, bounds.1).contains(count) {
            violations.push(QuasiViolation { i_size: a, j_size: b, count, allowed: bounds });
        }
    }
    (violations, checked)
}

/// Bad events for one stage, in canonical line order: one per line whose
/// condition could fail for some subset of `s0`, over the points of `s0` on
/// that line.
fn stage_events(s0: &PointSet, params: &NiceParams) -> (EventSystem, Vec<GridPoint>) {
    let g = s0.grid();
    let points: Vec<_> = s0.iter().copied().collect();
    let mut var_of = vec![u32::MAX; g.volume()];
    for (i, p) in points.iter().enumerate() {
        var_of[g.index_of(p)] = i as u32;
    }
    let mut lines = Vec::new();
    geometry::for_each_line_count(s0, min_relevant_points(params, g.n), |stats, count| {
        let bounds = params.bounds(&stats.line, stats.weight_f64());
        if bounds.lo > 0 || count > bounds.hi {
            lines.push((stats.line, bounds));
        }
    });
    lines.sort_by_key(|(line, _)| *line);
    let mut system = EventSystem::new(points.len());
    for (line, bounds) in lines {
        let members: Vec<u32> = geometry::points_on_line(&line, &g)
            .iter()
            .map(|p| var_of[g.index_of(p)])
            .filter(|&v| v != u32::MAX)
            .collect();
        system.push(members, bounds);
    }
    (system, points)
}

/// Per-stage bookkeeping for manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub m0: f64,
    pub m: f64,
    pub events: usize,
    pub resamples: u64,
    pub size: usize,
}

/// One stage: keep each point of `s0` with probability `m / m0`, then
/// resample violated lines until every condition (1)–(3) holds at `m`.
pub fn subsample_stage(
    s0: &PointSet,
    m0: f64,
    params: &NiceParams,
    cfg: &PracticalConfig,
    rng: &mut GridRng,
) -> Result<(PointSet, StageRecord)> {
    check_set_plane(s0)?;
    params.validate()?;
    let m = params.m;
    if !(m <= m0) {
        return Err(Error::invalid(format!("stage target m = {m} exceeds m0 = {m0}")));
    }
    let (system, points) = stage_events(s0, params);
    let record = |resamples, size| StageRecord { m0, m, events: system.len(), resamples, size };
    if !system.unsatisfiable().is_empty() {
        return Err(Error::BudgetExhausted {
            stage: 0,
            resamples: 0,
            unresolved: system.unsatisfiable().len(),
        });
    }
    let outcome = moser_tardos(&system, m / m0, cfg.resample_budget, rng);
    if !outcome.converged() {
        return Err(Error::BudgetExhausted {
            stage: 0,
            resamples: outcome.resamples,
            unresolved: outcome.unresolved.len(),
        });
    }
    let kept = points
        .iter()
        .zip(&outcome.state)
        .filter(|(_, &keep)| keep)
        .map(|(p, _)| *p);
    let set = PointSet::from_points(s0.grid(), kept)?;
    let rec = record(outcome.resamples, set.len());
    Ok((set, rec))
}

/// Runs every stage of `schedule` from the full grid down to `m_(1)`.
pub fn run_pipeline_with(
    schedule: &StageSchedule,
    g: &GridParams,
    cfg: &PracticalConfig,
    rng: &mut GridRng,
) -> Result<(PointSet, Vec<StageRecord>)> {
    if g.d != 2 || g.n != schedule.n {
        return Err(Error::invalid("grid does not match the schedule"));
    }
    cfg.validate()?;
    let mut set = PointSet::full(*g);
    let mut m0 = g.n as f64;
    let mut records = Vec::with_capacity(schedule.r());
    for (i, &m) in schedule.stages.iter().enumerate().rev() {
        let params = NiceParams::with_config(m, cfg);
        let (next, rec) = subsample_stage(&set, m0, &params, cfg, rng).map_err(|e| match e {
            Error::BudgetExhausted { resamples, unresolved, .. } => Error::BudgetExhausted {
                stage: i + 1,
                resamples,
                unresolved,
            },
            other => other,
        })?;
        records.push(rec);
        set = next;
        m0 = m;
    }
    Ok((set, records))
}

/// [`run_pipeline_with`] for `k` with the schedule's `ε`, seeded from `cfg`.
pub fn run_pipeline(k: u32, eps: f64, g: &GridParams, cfg: &PracticalConfig) -> Result<PointSet> {
    let schedule = build_schedule(k, g.n, eps)?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    run_pipeline_with(&schedule, g, cfg, &mut rng).map(|(s, _)| s)
}

/// `ε` used by the desk-scale constructor: `m_(1) = 2k` when that fits in
/// the grid, else `m_(1) = n`. With `δ = 0.25` this keeps every row at
/// `≥ 1.5 k` before regularization.
pub fn desk_eps(k: u32, n: u32) -> f64 {
    (n as f64 / k as f64 - 1.0).clamp(0.0, 1.0)
}

/// The bound chain behind one stage, for telling whether a run sits inside
/// the regime where the existence argument applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub m0: f64,
    pub m: f64,
    pub p: f64,
    /// `max(2 exp(-m^(1/6)/13), (1/(5m))^15)`; may underflow to 0.
    pub q_bound: f64,
    pub ln_q_bound: f64,
    /// `20 m^15`; may overflow to infinity.
    pub delta_dep: f64,
    pub ln_delta_dep: f64,
    /// `4 q Δ`, evaluated in log space.
    pub lll_product: f64,
    pub ln_lll_product: f64,
    /// `18 m0^4`, lines of weight above `m0^(-2)` through one point.
    pub d_lines: f64,
    /// `2 exp(-(δ/2)^2 (1 - δ^3) m^(1/3) / 3)` at `δ = m^(-1/12)`.
    pub chernoff_heavy: f64,
    /// `2 exp(-(δ/2)^2 (m^(1/3) - 1) / 3)`.
    pub chernoff_medium: f64,
    /// Both Chernoff terms are at most `2 exp(-m^(1/6)/13)`.
    pub chernoff_bound: f64,
    pub theory_satisfied: bool,
}

pub fn stage_diagnostics(m0: f64, m: f64) -> Result<StageDiagnostics> {
    if !(m >= 1.0 && m <= m0) || !m0.is_finite() {
        return Err(Error::invalid(format!("need 1 ≤ m ≤ m0, got m = {m}, m0 = {m0}")));
    }
    let ln_m = m.ln();
    let delta = m.powf(-1.0 / 12.0);
    let chernoff_bound = 2.0 * (-m.powf(1.0 / 6.0) / 13.0).exp();
    let ln_chernoff = 2f64.ln() - m.powf(1.0 / 6.0) / 13.0;
    let ln_poly = -15.0 * (5f64.ln() + ln_m);
    let ln_q_bound = ln_chernoff.max(ln_poly);
    let ln_delta_dep = 20f64.ln() + 15.0 * ln_m;
    let ln_lll_product = 4f64.ln() + ln_q_bound + ln_delta_dep;
    let quarter = (delta / 2.0).powi(2);
    Ok(StageDiagnostics {
        m0,
        m,
        p: m / m0,
        q_bound: ln_q_bound.exp(),
        ln_q_bound,
        delta_dep: ln_delta_dep.exp(),
        ln_delta_dep,
        lll_product: ln_lll_product.exp(),
        ln_lll_product,
        d_lines: 18.0 * m0.powi(4),
        chernoff_heavy: 2.0 * (-quarter * (1.0 - delta.powi(3)) * m.cbrt() / 3.0).exp(),
        chernoff_medium: 2.0 * (-quarter * (m.cbrt() - 1.0) / 3.0).exp(),
        chernoff_bound,
        theory_satisfied: ln_lll_product <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(n: u32) -> GridParams {
        GridParams::plane(n).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let s = build_schedule(10, 1_000_000, 0.005).unwrap();
        assert_eq!(s.r(), 2);
        assert!((s.stages[0] - 10.05).abs() < 1e-12);
        assert!((s.stages[1] - 1015.075125).abs() < 1e-6);
        assert!(s.stages[1].powi(3) >= 1e6);

        let s = build_schedule(10, 1000, 0.005).unwrap();
        assert_eq!(s.r(), 1);
        assert!(s.stages[0].powi(3) >= 1000.0);

        let s = build_schedule(37, 37, 0.0).unwrap();
        assert_eq!(s.stages, vec![37.0]);

        assert!(build_schedule(12, 10, 0.0).is_err());
        assert!(build_schedule(10, 10, 0.1).is_err());
        assert!(build_schedule(1, 10, 0.0).is_err());
    }

    #[test]
    fn params_thresholds_are_ordered() {
        for m in [2.0, 16.0, 1e3, 1e12] {
            let p = NiceParams::exact(m);
            assert!(p.light_threshold < p.heavy_threshold && p.heavy_threshold < 1.0);
            assert!(p.delta > 0.0 && p.delta < 1.0);
        }
        assert!(NiceParams::exact(0.5).validate().is_err());
    }

    #[test]
    fn desk_ceilings_never_drop_below_light_cap() {
        let cfg = PracticalConfig::desk(0);
        let p = NiceParams::with_config(16.0, &cfg);
        let diag = Line::new(1, -1, 0).unwrap();
        // A 20-point diagonal at n = 64 expects 5 points.
        assert_eq!(p.allowed(&diag, 20.0 / 64.0), (0.0, 14.0));
        let row = Line::new(1, 0, 3).unwrap();
        assert_eq!(p.allowed(&row, 1.0), (12.0, 20.0));
        let strict = NiceParams::with_config(16.0, &PracticalConfig::strict(0));
        assert!(strict.allowed(&diag, 20.0 / 64.0).1 < 14.0);
    }

    #[test]
    fn full_grid_lines_fixed_point() {
        let cfg = PracticalConfig::strict(0);
        for n in 2..=128u32 {
            let g = plane(n);
            let params = NiceParams::with_config(n as f64, &cfg);
            let report = check_nice_lines(&PointSet::full(g), &params).unwrap();
            assert!(report.lines_passed(), "n = {n}: {report:?}");
        }
    }

    #[test]
    fn full_grid_passes_everything() {
        for n in [2u32, 5, 10, 23, 40] {
            let g = plane(n);
            let cfg = PracticalConfig::strict(1);
            let params = NiceParams::with_config(n as f64, &cfg);
            let report =
                check_nice(&PointSet::full(g), &params, &cfg, &mut rng_from_seed(1)).unwrap();
            assert!(report.passed(), "n = {n}: {report:?}");
            assert!(report.quasi_pairs_checked > cfg.quasi_sample_pairs);
        }
    }

    #[test]
    fn empty_set_breaks_lower_bounds() {
        let g = plane(20);
        let cfg = PracticalConfig::desk(0);
        let params = NiceParams::with_config(5.0, &cfg);
        let report = check_nice_lines(&PointSet::empty(g), &params).unwrap();
        assert_eq!(report.heavy_violations.len(), 40);
        assert!(report.heavy_violations.iter().all(|v| v.line.is_axis() && v.count == 0));
    }

    #[test]
    fn full_row_is_reported() {
        let g = plane(32);
        let cfg = PracticalConfig::desk(3);
        let mut rng = rng_from_seed(3);
        let schedule = build_schedule(8, 32, 1.0).unwrap();
        let (mut set, _) = run_pipeline_with(&schedule, &g, &cfg, &mut rng).unwrap();
        let params = NiceParams::with_config(16.0, &cfg);
        assert!(check_nice_lines(&set, &params).unwrap().lines_passed());
        for y in 1..=32 {
            set.insert(GridPoint::xy(7, y)).unwrap();
        }
        let report = check_nice_lines(&set, &params).unwrap();
        let row = Line::new(1, 0, 7).unwrap();
        assert!(report.heavy_violations.iter().any(|v| v.line == row && v.count == 32));
    }

    #[test]
    fn planted_cluster_is_reported() {
        let g = plane(32);
        let cfg = PracticalConfig::desk(5);
        let schedule = build_schedule(8, 32, 1.0).unwrap();
        let (set, _) = run_pipeline_with(&schedule, &g, &cfg, &mut rng_from_seed(5)).unwrap();
        let params = NiceParams::with_config(16.0, &cfg);
        assert!(check_nice_lines(&set, &params).unwrap().lines_passed());
        // x - 2y = -12 meets the grid in 16 points, well above its ceiling.
        let line = Line::new(1, -2, -12).unwrap();
        let mut planted = set.clone();
        for p in geometry::points_on_line(&line, &g) {
            planted.insert(p).unwrap();
        }
        let report = check_nice_lines(&planted, &params).unwrap();
        assert!(report.heavy_violations.iter().any(|v| v.line == line));
    }

    #[test]
    fn stage_at_full_probability_keeps_everything() {
        let g = plane(12);
        let cfg = PracticalConfig::desk(0);
        let params = NiceParams::with_config(12.0, &cfg);
        let full = PointSet::full(g);
        let (set, rec) = subsample_stage(&full, 12.0, &params, &cfg, &mut rng_from_seed(0)).unwrap();
        assert_eq!(set, full);
        assert_eq!(rec.resamples, 0);
        let too_big = NiceParams::with_config(13.0, &cfg);
        assert!(subsample_stage(&full, 12.0, &too_big, &cfg, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn degenerate_pipeline_returns_full_grid() {
        let g = plane(9);
        let set = run_pipeline(9, 0.0, &g, &PracticalConfig::desk(4)).unwrap();
        assert_eq!(set, PointSet::full(g));
    }

    #[test]
    fn pipeline_is_deterministic_and_nested() {
        let g = plane(48);
        let cfg = PracticalConfig::desk(11);
        let a = run_pipeline(12, 1.0, &g, &cfg).unwrap();
        let b = run_pipeline(12, 1.0, &g, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_subset(&PointSet::full(g)));
        let c = run_pipeline(12, 1.0, &g, &PracticalConfig::desk(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn desk_eps_fits_grid() {
        assert_eq!(desk_eps(16, 64), 1.0);
        assert_eq!(desk_eps(8, 8), 0.0);
        assert!((desk_eps(40, 64) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_regimes() {
        let theory = stage_diagnostics(1e108, 1e36).unwrap();
        assert!(theory.lll_product < 1.0 && theory.theory_satisfied);
        assert_eq!(theory.q_bound, 0.0);
        assert!(theory.ln_lll_product.is_finite());

        let desk = stage_diagnostics(1000.0, 10.0).unwrap();
        assert!(desk.lll_product >= 1.0 && !desk.theory_satisfied);
        assert!((desk.p - 0.01).abs() < 1e-15);
        assert_eq!(desk.d_lines, 18e12);

        let flat = stage_diagnostics(50.0, 50.0).unwrap();
        assert_eq!(flat.p, 1.0);
        assert!(stage_diagnostics(10.0, 11.0).is_err());
    }
}
