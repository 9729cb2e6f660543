//! Moser–Tardos resampling over counting constraints.
//!
//! Variables are independent Bernoulli(p) indicators, one per candidate
//! point. Each bad event is "the number of selected points in this block
//! leaves `[lo, hi]`". While some event is violated, the lowest-numbered one
//! has all of its variables redrawn. Callers number events in canonical
//! order so runs are reproducible.

use std::collections::BTreeSet;

use rand::Rng;

use crate::rng::GridRng;

/// Inclusive bounds on the number of selected members of one event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountBounds {
    pub lo: u32,
    pub hi: u32,
}

impl CountBounds {
    pub fn contains(&self, k: u32) -> bool {
        self.lo <= k && k <= self.hi
    }

    /// Integer bounds for the real interval `[lo, hi]`. A slack of 1e-9 keeps
    /// exactly representable endpoints (e.g. `m * w` at `m = n`) inclusive.
    pub fn from_real(lo: f64, hi: f64) -> Self {
        const SLACK: f64 = 1e-9;
        let lo = (lo - SLACK).ceil().max(0.0);
        let hi = (hi + SLACK).floor();
        Self {
            lo: lo.min(u32::MAX as f64) as u32,
            hi: if hi < 0.0 { 0 } else { hi.min(u32::MAX as f64) as u32 },
        }
    }

    pub fn at_most(hi: u32) -> Self {
        Self { lo: 0, hi }
    }
}

/// A family of counting events over `num_vars` Bernoulli variables.
#[derive(Clone, Debug, Default)]
pub struct EventSystem {
    num_vars: usize,
    members: Vec<Vec<u32>>,
    bounds: Vec<CountBounds>,
}

impl EventSystem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, ..Default::default() }
    }

    /// Adds an event and returns its id. Ids give the resampling priority.
    pub fn push(&mut self, members: Vec<u32>, bounds: CountBounds) -> usize {
        debug_assert!(members.iter().all(|&v| (v as usize) < self.num_vars));
        self.members.push(members);
        self.bounds.push(bounds);
        self.members.len() - 1
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn bounds(&self, event: usize) -> CountBounds {
        self.bounds[event]
    }

    pub fn members(&self, event: usize) -> &[u32] {
        &self.members[event]
    }

    /// Events that no assignment can satisfy (fewer members than `lo`).
    pub fn unsatisfiable(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&e| (self.members[e].len() as u32) < self.bounds[e].lo)
            .collect()
    }

    pub fn violated(&self, state: &[bool]) -> Vec<usize> {
        (0..self.len())
            .filter(|&e| {
                let k = self.members[e].iter().filter(|&&v| state[v as usize]).count() as u32;
                !self.bounds[e].contains(k)
            })
            .collect()
    }
}

/// Result of a resampling run.
#[derive(Clone, Debug)]
pub struct ResampleOutcome {
    pub state: Vec<bool>,
    pub resamples: u64,
    /// Violated events left when the run stopped; empty on success.
    pub unresolved: Vec<usize>,
}

impl ResampleOutcome {
    pub fn converged(&self) -> bool {
        self.unresolved.is_empty()
    }
}

/// Draws every variable with probability `p`, then resamples violated events
/// (lowest id first) until none remain or `budget` resamplings were spent.
pub fn moser_tardos(system: &EventSystem, p: f64, budget: u64, rng: &mut GridRng) -> ResampleOutcome {
    let p = p.clamp(0.0, 1.0);
    let mut incidence: Vec<Vec<u32>> = vec![Vec::new(); system.num_vars];
    for (e, members) in system.members.iter().enumerate() {
        for &v in members {
            incidence[v as usize].push(e as u32);
        }
    }

    let mut state: Vec<bool> = (0..system.num_vars).map(|_| rng.gen_bool(p)).collect();
    let mut counts: Vec<u32> = system
        .members
        .iter()
        .map(|m| m.iter().filter(|&&v| state[v as usize]).count() as u32)
        .collect();
    let mut bad: BTreeSet<u32> = (0..system.len() as u32)
        .filter(|&e| !system.bounds[e as usize].contains(counts[e as usize]))
        .collect();

    let mut resamples = 0u64;
    while let Some(&event) = bad.first() {
        if resamples >= budget {
            break;
        }
        resamples += 1;
        for &v in &system.members[event as usize] {
            let new = rng.gen_bool(p);
            let slot = &mut state[v as usize];
            if *slot == new {
                continue;
            }
            *slot = new;
            for &e in &incidence[v as usize] {
                let c = &mut counts[e as usize];
                if new {
                    *c += 1;
                } else {
                    *c -= 1;
                }
                if system.bounds[e as usize].contains(*c) {
                    bad.remove(&e);
                } else {
                    bad.insert(e);
                }
            }
        }
    }

    ResampleOutcome {
        state,
        resamples,
        unresolved: bad.into_iter().map(|e| e as usize).collect(),
    }
}
