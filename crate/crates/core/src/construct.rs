//! The planar constructor: staged subsampling, then regularization to
//! exactly `k` per row and column, then an optional swap repair of long
//! non-axis lines. Each attempt runs on its own derived seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline2d::{build_schedule, desk_eps, run_pipeline_with, PracticalConfig, StageRecord, StageSchedule};
use crate::point::{GridParams, PointSet};
use crate::regularizer::{regularize, trim_lines, Regularized};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructOptions {
    pub k: u32,
    /// `None` picks [`desk_eps`].
    pub eps: Option<f64>,
    pub cfg: PracticalConfig,
    pub trim: bool,
    pub trim_budget: u64,
}

impl ConstructOptions {
    pub fn new(k: u32, seed: u64) -> Self {
        Self { k, eps: None, cfg: PracticalConfig::desk(seed), trim: true, trim_budget: 1_000_000 }
    }
}

/// Why one attempt was abandoned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedAttempt {
    pub attempt: u32,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub set: PointSet,
    /// Output of the last resampling stage, before regularization.
    pub pipeline_size: usize,
    pub schedule: StageSchedule,
    pub stages: Vec<StageRecord>,
    pub attempt: u32,
    pub attempt_seed: u64,
    pub failures: Vec<FailedAttempt>,
    pub trim_swaps: u64,
    pub trim_attempts: u64,
}

/// Seed of attempt `a` under base seed `seed`.
pub fn attempt_seed(seed: u64, attempt: u32) -> u64 {
    derive_seed(seed, 0, attempt as u64)
}

pub fn construct(g: &GridParams, opts: &ConstructOptions) -> Result<Construction> {
    if g.d != 2 {
        return Err(Error::invalid("construct needs a planar grid"));
    }
    opts.cfg.validate()?;
    let eps = opts.eps.unwrap_or_else(|| desk_eps(opts.k, g.n));
    let schedule = build_schedule(opts.k, g.n, eps)?;
    let mut failures = Vec::new();
    for attempt in 0..opts.cfg.retry_budget {
        let seed = attempt_seed(opts.cfg.rng_seed, attempt);
        let mut rng = rng_from_seed(seed);
        let fail = |reason: String| FailedAttempt { attempt, seed, reason };
        let (pool, stages) = match run_pipeline_with(&schedule, g, &opts.cfg, &mut rng) {
            Ok(out) => out,
            Err(e) if e.is_budget() => {
                failures.push(fail(e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let regular = match regularize(&pool, opts.k)? {
            Regularized::Regular(set) => set,
            Regularized::Infeasible(cert) => {
                failures.push(fail(format!("no {}-regular subset (deficiency {})", opts.k, cert.deficiency)));
                continue;
            }
        };
        let (set, trim_swaps, trim_attempts) = if opts.trim {
            match trim_lines(&regular, &pool, opts.k, opts.trim_budget, &mut rng) {
                Ok(t) => (t.set, t.swaps, t.attempts),
                Err(e) if e.is_budget() => {
                    failures.push(fail(format!("line trimming: {e}")));
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            (regular, 0, 0)
        };
        return Ok(Construction {
            set,
            pipeline_size: pool.len(),
            schedule,
            stages,
            attempt,
            attempt_seed: seed,
            failures,
            trim_swaps,
            trim_attempts,
        });
    }
    Err(Error::BudgetExhausted {
        stage: 0,
        resamples: opts.cfg.retry_budget as u64,
        unresolved: failures.len(),
    })
}
