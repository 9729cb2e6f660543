//! Exactly `k` points per row and column.
//!
//! A planar point set is a bipartite graph between rows and columns. A
//! `k`-regular spanning subgraph exists iff the Ore–Ryser condition
//! `e(A, B0 \ B) ≥ k (|A| - |B|)` holds for all row sets `A` and column sets
//! `B`. We decide it with a max-flow computation; when the flow falls short,
//! the source side of the minimum cut is a pair `(A, B)` violating it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Line};
use crate::point::{GridParams, GridPoint, PointSet};
use crate::rng::GridRng;

/// Rows and columns are numbered `1..=n`; edge `(i, j)` is the point `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    n: u32,
    edges: BTreeSet<(u32, u32)>,
}

impl BipartiteGraph {
    pub fn new(n: u32, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i == 0 || j == 0 || i > n || j > n) {
            return Err(Error::invalid(format!("edge ({i}, {j}) outside [{n}] × [{n}]")));
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(u32, u32)> {
        &self.edges
    }

    pub fn has_edge(&self, i: u32, j: u32) -> bool {
        self.edges.contains(&(i, j))
    }

    /// `e(A, B)`: edges from rows in `a` to columns in `b`.
    pub fn edges_between(&self, a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> usize {
        self.edges.iter().filter(|(i, j)| a.contains(i) && b.contains(j)).count()
    }
}

pub fn to_bipartite(set: &PointSet) -> Result<BipartiteGraph> {
    let g = set.grid();
    if g.d != 2 {
        return Err(Error::invalid(format!("expected a planar point set, got d = {}", g.d)));
    }
    BipartiteGraph::new(g.n, set.iter().map(|p| (p.x() as u32, p.y() as u32)))
}

/// The seven classes covering all pairs `(A, B)`; a pair may be in several.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairType {
    T0,
    T1,
    T2,
    T3,
    T1Star,
    T2Star,
    T3Star,
}

impl fmt::Display for PairType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PairType::T0 => "0",
            PairType::T1 => "1",
            PairType::T2 => "2",
            PairType::T3 => "3",
            PairType::T1Star => "1*",
            PairType::T2Star => "2*",
            PairType::T3Star => "3*",
        };
        f.write_str(s)
    }
}

/// Every type label that applies to a pair with `|A| = a`, `|B| = b` in a
/// graph with `n` rows and columns.
pub fn classify_sizes(a: usize, b: usize, n: usize) -> Vec<PairType> {
    let (ac, bc) = (n - a, n - b);
    let mut out = Vec::new();
    if b >= a {
        out.push(PairType::T0);
    }
    if a > 2 * b {
        out.push(PairType::T1);
    }
    if 10 * a >= n && 2 * b <= n {
        out.push(PairType::T2);
    }
    if b < a && a <= 2 * b && 10 * b <= n {
        out.push(PairType::T3);
    }
    if bc > 2 * ac {
        out.push(PairType::T1Star);
    }
    if 10 * bc >= n && 2 * ac <= n {
        out.push(PairType::T2Star);
    }
    if ac < bc && bc <= 2 * ac && 10 * ac <= n {
        out.push(PairType::T3Star);
    }
    out
}

pub fn classify_pair(a: &BTreeSet<u32>, b: &BTreeSet<u32>, g: &GridParams) -> Vec<PairType> {
    classify_sizes(a.len(), b.len(), g.n as usize)
}

/// A pair `(A, B)` with `e(A, B0 \ B) < k (|A| - |B|)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallCertificate {
    pub rows: BTreeSet<u32>,
    pub cols: BTreeSet<u32>,
    /// `k (|A| - |B|) - e(A, B0 \ B)`.
    pub deficiency: i64,
    pub pair_types: Vec<PairType>,
}

impl HallCertificate {
    fn build(g: &BipartiteGraph, k: u32, rows: BTreeSet<u32>, cols: BTreeSet<u32>) -> Self {
        let deficiency = deficiency(g, k, &rows, &cols);
        let pair_types = classify_sizes(rows.len(), cols.len(), g.n as usize);
        Self { rows, cols, deficiency, pair_types }
    }
}

fn deficiency(g: &BipartiteGraph, k: u32, rows: &BTreeSet<u32>, cols: &BTreeSet<u32>) -> i64 {
    let outside: BTreeSet<u32> = (1..=g.n).filter(|j| !cols.contains(j)).collect();
    k as i64 * (rows.len() as i64 - cols.len() as i64) - g.edges_between(rows, &outside) as i64
}

/// True iff the certificate's sets lie in `[n]` and genuinely violate the
/// Ore–Ryser inequality.
pub fn verify_certificate(g: &BipartiteGraph, k: u32, cert: &HallCertificate) -> bool {
    let in_range = |s: &BTreeSet<u32>| s.iter().all(|&v| v >= 1 && v <= g.n);
    in_range(&cert.rows) && in_range(&cert.cols) && deficiency(g, k, &cert.rows, &cert.cols) > 0
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KRegular {
    /// Edges of a spanning subgraph with every degree exactly `k`.
    Subgraph(BTreeSet<(u32, u32)>),
    Infeasible(HallCertificate),
}

/// Dinic's algorithm on an explicit arc list.
struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self { head: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    /// Adds `u → v` and its residual twin; returns the forward arc id.
    fn add_arc(&mut self, u: usize, v: usize, cap: u32) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        id
    }

    fn levels(&self, s: usize) -> Vec<u32> {
        let mut level = vec![u32::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, limit: u32, level: &[u32], next: &mut [usize]) -> u32 {
        if u == t {
            return limit;
        }
        while next[u] < self.head[u].len() {
            let e = self.head[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let pushed = self.augment(v, t, limit.min(self.cap[e]), level, next);
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut total = 0u64;
        loop {
            let level = self.levels(s);
            if level[t] == u32::MAX {
                return total;
            }
            let mut next = vec![0usize; self.head.len()];
            loop {
                let pushed = self.augment(s, t, u32::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed as u64;
            }
        }
    }
}

/// Source → row (capacity `k`), row → column per edge (capacity 1),
/// column → sink (capacity `k`). Feasible iff the max flow is `k n`.
pub fn k_regular_subgraph(g: &BipartiteGraph, k: u32) -> Result<KRegular> {
    if k > g.n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {}", g.n)));
    }
    let n = g.n as usize;
    let (source, sink) = (0, 2 * n + 1);
    let row = |i: u32| i as usize;
    let col = |j: u32| n + j as usize;
    let mut net = FlowNetwork::new(2 * n + 2);
    for i in 1..=g.n {
        net.add_arc(source, row(i), k);
        net.add_arc(col(i), sink, k);
    }
    let arcs: Vec<((u32, u32), usize)> =
        g.edges.iter().map(|&(i, j)| ((i, j), net.add_arc(row(i), col(j), 1))).collect();
    let flow = net.max_flow(source, sink);
    if flow == k as u64 * g.n as u64 {
        let chosen = arcs.into_iter().filter(|&(_, e)| net.cap[e] == 0).map(|(edge, _)| edge).collect();
        return Ok(KRegular::Subgraph(chosen));
    }
    let reach = net.levels(source);
    let rows = (1..=g.n).filter(|&i| reach[row(i)] != u32::MAX).collect();
    let cols = (1..=g.n).filter(|&j| reach[col(j)] != u32::MAX).collect();
    Ok(KRegular::Infeasible(HallCertificate::build(g, k, rows, cols)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Regularized {
    Regular(PointSet),
    Infeasible(HallCertificate),
}

/// `S' ⊆ S` with exactly `k` points on every row and column, or a
/// certificate that none exists.
pub fn regularize(set: &PointSet, k: u32) -> Result<Regularized> {
    let graph = to_bipartite(set)?;
    let n = graph.n;
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    if (k as usize) * (n as usize) > set.len() {
        // All rows against no columns: deficiency k n - |S|.
        let rows = (1..=n).collect();
        return Ok(Regularized::Infeasible(HallCertificate::build(&graph, k, rows, BTreeSet::new())));
    }
    Ok(match k_regular_subgraph(&graph, k)? {
        KRegular::Subgraph(edges) => {
            let points = edges.into_iter().map(|(i, j)| GridPoint::xy(i as i32, j as i32));
            Regularized::Regular(PointSet::from_points(set.grid(), points)?)
        }
        KRegular::Infeasible(cert) => Regularized::Infeasible(cert),
    })
}

/// [`regularize`] under a random relabelling of rows and columns. The flow
/// fills each row from its lowest-numbered free columns, which lines up
/// the chosen points along diagonals; relabelling first breaks that
/// pattern. Certificates are mapped back to the original labels.
pub fn regularize_shuffled(set: &PointSet, k: u32, rng: &mut GridRng) -> Result<Regularized> {
    let g = set.grid();
    if g.d != 2 {
        return Err(Error::invalid("regularization needs a planar set"));
    }
    let n = g.n as i32;
    let mut rows: Vec<i32> = (1..=n).collect();
    let mut cols: Vec<i32> = (1..=n).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let inverse = |perm: &[i32]| {
        let mut inv = vec![0; perm.len() + 1];
        for (i, &v) in perm.iter().enumerate() {
            inv[v as usize] = i as i32 + 1;
        }
        inv
    };
    let (row_inv, col_inv) = (inverse(&rows), inverse(&cols));
    let relabelled =
        PointSet::from_points(g, set.iter().map(|p| GridPoint::xy(rows[p.x() as usize - 1], cols[p.y() as usize - 1])))?;
    Ok(match regularize(&relabelled, k)? {
        Regularized::Regular(out) => Regularized::Regular(PointSet::from_points(
            g,
            out.iter().map(|p| GridPoint::xy(row_inv[p.x() as usize], col_inv[p.y() as usize])),
        )?),
        Regularized::Infeasible(cert) => {
            let graph = to_bipartite(set)?;
            let a = cert.rows.iter().map(|&r| row_inv[r as usize] as u32).collect();
            let b = cert.cols.iter().map(|&c| col_inv[c as usize] as u32).collect();
            Regularized::Infeasible(HallCertificate::build(&graph, k, a, b))
        }
    })
}

/// Outcome of [`trim_lines`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrimOutcome {
    pub set: PointSet,
    pub swaps: u64,
    pub attempts: u64,
}

/// Line counters for every non-axis direction able to exceed `cap`.
struct LineLoad {
    cap: u32,
    dirs: Vec<(i64, i64, i64)>,
    counts: Vec<Vec<u32>>,
    over: BTreeMap<Line, u32>,
    excess: u64,
}

impl LineLoad {
    fn new(set: &PointSet, cap: u32) -> Self {
        let n = set.grid().n as i64;
        let dirs: Vec<_> = geometry::directions(set.grid().n, cap + 1)
            .into_iter()
            .filter(|d| d.dx != 0 && d.dy != 0)
            .map(|d| {
                let proto = d.line_through(&GridPoint::xy(1, 1));
                let (a, b) = (proto.a, proto.b);
                let corners = [a + b, a + b * n, a * n + b, (a + b) * n];
                (a, b, *corners.iter().min().unwrap())
            })
            .collect();
        let counts = dirs.iter().map(|&(a, b, c_min)| {
            let c_max = [a + b, a + b * n, a * n + b, (a + b) * n].into_iter().max().unwrap();
            vec![0u32; (c_max - c_min + 1) as usize]
        });
        let mut load =
            Self { cap, counts: counts.collect(), dirs, over: BTreeMap::new(), excess: 0 };
        for p in set {
            load.update(p, true);
        }
        load
    }

    fn update(&mut self, p: &GridPoint, add: bool) {
        let (x, y) = (p.x() as i64, p.y() as i64);
        for (k, &(a, b, c_min)) in self.dirs.iter().enumerate() {
            let c = a * x + b * y;
            let slot = &mut self.counts[k][(c - c_min) as usize];
            let before = *slot;
            *slot = if add { before + 1 } else { before - 1 };
            let after = *slot;
            let over = |v: u32| v.saturating_sub(self.cap) as u64;
            self.excess = self.excess + over(after) - over(before);
            let line = Line { a, b, c };
            if after > self.cap {
                self.over.insert(line, after);
            } else if before > self.cap {
                self.over.remove(&line);
            }
        }
    }
}

/// Lowers every non-axis line of a `k`-regular set `T ⊆ pool` to at most
/// `cap` points using swaps `(x1,y1),(x2,y2) → (x1,y2),(x2,y1)` inside
/// `pool`, which keep every row and column count fixed. The first overfull
/// line (canonical order) donates a random point each step; a swap is kept
/// when it does not raise the total excess, or with probability 1/8.
pub fn trim_lines(
    regular: &PointSet,
    pool: &PointSet,
    cap: u32,
    budget: u64,
    rng: &mut GridRng,
) -> Result<TrimOutcome> {
    let g = regular.grid();
    if g.d != 2 || !regular.is_subset(pool) {
        return Err(Error::invalid("trim_lines needs a planar set inside its pool"));
    }
    let n = g.n as usize;
    let idx = |x: i32, y: i32| (x as usize - 1) * n + (y as usize - 1);
    let in_pool = pool.mask();
    let mut in_set = regular.mask();
    let mut rows: Vec<Vec<i32>> = vec![Vec::new(); n + 1];
    for p in regular {
        rows[p.x() as usize].push(p.y());
    }
    let mut load = LineLoad::new(regular, cap);
    let mut swaps = 0u64;
    let mut attempts = 0u64;
    while let Some((&line, _)) = load.over.first_key_value() {
        if attempts >= budget {
            return Err(Error::BudgetExhausted {
                stage: 0,
                resamples: attempts,
                unresolved: load.over.len(),
            });
        }
        attempts += 1;
        let on_line: Vec<GridPoint> = geometry::points_on_line(&line, &g)
            .into_iter()
            .filter(|p| in_set[idx(p.x(), p.y())])
            .collect();
        let p = on_line[rng.gen_range(0..on_line.len())];
        let (x1, y1) = (p.x(), p.y());
        let x2 = rng.gen_range(1..=n as i32);
        if x2 == x1 || rows[x2 as usize].is_empty() {
            continue;
        }
        let y2 = rows[x2 as usize][rng.gen_range(0..rows[x2 as usize].len())];
        if y2 == y1 {
            continue;
        }
        let (a, b) = (GridPoint::xy(x1, y2), GridPoint::xy(x2, y1));
        if in_set[idx(x1, y2)] || in_set[idx(x2, y1)] || !in_pool[idx(x1, y2)] || !in_pool[idx(x2, y1)] {
            continue;
        }
        let q = GridPoint::xy(x2, y2);
        let before = load.excess;
        load.update(&p, false);
        load.update(&q, false);
        load.update(&a, true);
        load.update(&b, true);
        if load.excess > before && rng.gen_range(0..8) != 0 {
            load.update(&a, false);
            load.update(&b, false);
            load.update(&p, true);
            load.update(&q, true);
            continue;
        }
        for (pt, on) in [(p, false), (q, false), (a, true), (b, true)] {
            in_set[idx(pt.x(), pt.y())] = on;
        }
        let r1 = &mut rows[x1 as usize];
        let pos = r1.iter().position(|&y| y == y1).unwrap();
        r1[pos] = y2;
        let r2 = &mut rows[x2 as usize];
        let pos = r2.iter().position(|&y| y == y2).unwrap();
        r2[pos] = y1;
        swaps += 1;
    }
    Ok(TrimOutcome { set: PointSet::from_mask(g, &in_set), swaps, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn complete(n: u32) -> BipartiteGraph {
        BipartiteGraph::new(n, (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j)))).unwrap()
    }

    fn degrees(n: u32, edges: &BTreeSet<(u32, u32)>) -> (Vec<u32>, Vec<u32>) {
        let mut r = vec![0; n as usize + 1];
        let mut c = vec![0; n as usize + 1];
        for &(i, j) in edges {
            r[i as usize] += 1;
            c[j as usize] += 1;
        }
        (r[1..].to_vec(), c[1..].to_vec())
    }

    #[test]
    fn complete_graph_is_regular_for_every_k() {
        for k in 0..=5 {
            match k_regular_subgraph(&complete(5), k).unwrap() {
                KRegular::Subgraph(h) => {
                    let (r, c) = degrees(5, &h);
                    assert!(r.iter().chain(&c).all(|&d| d == k));
                }
                KRegular::Infeasible(_) => panic!("complete graph infeasible at k = {k}"),
            }
        }
        assert!(k_regular_subgraph(&complete(5), 6).is_err());
    }

    #[test]
    fn short_row_yields_row_certificate() {
        let n = 5;
        let g = BipartiteGraph::new(
            n,
            (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).filter(|&(i, j)| i != 2 || j <= 2),
        )
        .unwrap();
        let KRegular::Infeasible(cert) = k_regular_subgraph(&g, 3).unwrap() else {
            panic!("expected a certificate");
        };
        assert_eq!(cert.rows, BTreeSet::from([2]));
        assert!(cert.cols.is_empty());
        assert_eq!(cert.deficiency, 1);
        assert!(verify_certificate(&g, 3, &cert));
    }

    #[test]
    fn type_zero_pairs_never_verify() {
        let g = complete(4);
        let cert = HallCertificate {
            rows: BTreeSet::from([1, 2]),
            cols: BTreeSet::from([3, 4]),
            deficiency: 0,
            pair_types: vec![PairType::T0],
        };
        assert!(!verify_certificate(&g, 4, &cert));
    }

    #[test]
    fn classification_examples() {
        let g = GridParams::plane(10).unwrap();
        let set = |v: &[u32]| v.iter().copied().collect::<BTreeSet<u32>>();
        assert!(classify_pair(&set(&[1, 2]), &set(&[3, 4, 5]), &g).contains(&PairType::T0));
        assert!(classify_pair(&set(&[1, 2, 3, 4, 5]), &set(&[1, 2]), &g).contains(&PairType::T1));
        assert_eq!(PairType::T2Star.to_string(), "2*");
    }

    #[test]
    fn every_pair_size_has_a_type() {
        for n in 1..=60 {
            for a in 0..=n {
                for b in 0..=n {
                    assert!(!classify_sizes(a, b, n).is_empty(), "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn regularize_full_grid_and_missing_row() {
        let g = GridParams::plane(6).unwrap();
        for k in 1..=6 {
            let Regularized::Regular(s) = regularize(&PointSet::full(g), k).unwrap() else {
                panic!("full grid must regularize");
            };
            assert_eq!(s.len(), 6 * k as usize);
            assert!(s.axis_counts(0).iter().chain(&s.axis_counts(1)).all(|&c| c == k));
        }
        let missing =
            PointSet::from_points(g, g.points().filter(|p| p.x() != 4)).unwrap();
        let Regularized::Infeasible(cert) = regularize(&missing, 2).unwrap() else {
            panic!("missing row cannot regularize");
        };
        assert_eq!(cert.rows, BTreeSet::from([4]));
        assert!(verify_certificate(&to_bipartite(&missing).unwrap(), 2, &cert));
    }

    #[test]
    fn small_sets_short_circuit() {
        let g = GridParams::plane(5).unwrap();
        let set = PointSet::from_points(g, [GridPoint::xy(1, 1)]).unwrap();
        let Regularized::Infeasible(cert) = regularize(&set, 1).unwrap() else {
            panic!()
        };
        assert_eq!(cert.rows.len(), 5);
        assert_eq!(cert.deficiency, 4);
    }

    #[test]
    fn shuffled_regularization_agrees_with_flow() {
        let mut rng = crate::rng::rng_from_seed(4);
        let g = GridParams::plane(9).unwrap();
        let full = PointSet::full(g);
        let Regularized::Regular(out) = regularize_shuffled(&full, 3, &mut rng).unwrap() else { panic!() };
        assert_eq!(out.len(), 27);
        assert!(out.axis_counts(0).iter().chain(&out.axis_counts(1)).all(|&c| c == 3));
        let short = PointSet::from_points(g, full.iter().copied().filter(|p| p.x() != 4 || p.y() > 2)).unwrap();
        let Regularized::Infeasible(cert) = regularize_shuffled(&short, 8, &mut rng).unwrap() else { panic!() };
        assert!(verify_certificate(&to_bipartite(&short).unwrap(), 8, &cert));
    }

    #[test]
    fn trimming_keeps_marginals() {
        let g = GridParams::plane(12).unwrap();
        // The identity-like 4-regular set piles points on the main diagonals.
        let regular = PointSet::from_points(
            g,
            g.points().filter(|p| (p.y() - p.x()).rem_euclid(12) < 4),
        )
        .unwrap();
        let pool = PointSet::full(g);
        let out = trim_lines(&regular, &pool, 4, 100_000, &mut rng_from_seed(2)).unwrap();
        assert!(out.set.axis_counts(0).iter().chain(&out.set.axis_counts(1)).all(|&c| c == 4));
        let worst = geometry::line_hits(&out.set, 2)
            .into_iter()
            .filter(|(l, _)| !l.is_axis())
            .map(|(_, c)| c)
            .max()
            .unwrap();
        assert!(worst <= 4);
    }
}
