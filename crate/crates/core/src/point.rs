//! Grid points and point sets in `[n]^d`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension the crate supports at runtime.
pub const MAX_DIM: usize = 3;

/// The grid `[n]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridParams {
    pub n: u32,
    pub d: usize,
}

impl GridParams {
    pub fn new(n: u32, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid side must be at least 2, got {n}")));
        }
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
        }
        Ok(Self { n, d })
    }

    pub fn plane(n: u32) -> Result<Self> {
        Self::new(n, 2)
    }

    /// Number of grid points, `n^d`.
    pub fn volume(&self) -> usize {
        (self.n as usize).pow(self.d as u32)
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        p.dim() == self.d && p.coords().iter().all(|&c| c >= 1 && c as i64 <= self.n as i64)
    }

    /// Dense index of `p` (row-major over coordinates, 0-based).
    pub fn index_of(&self, p: &GridPoint) -> usize {
        let n = self.n as usize;
        p.coords()
            .iter()
            .fold(0usize, |acc, &c| acc * n + (c as usize - 1))
    }

    pub fn point_at(&self, mut idx: usize) -> GridPoint {
        let n = self.n as usize;
        let mut c = [0i32; MAX_DIM];
        for i in (0..self.d).rev() {
            c[i] = (idx % n) as i32 + 1;
            idx /= n;
        }
        GridPoint::from_array(c, self.d)
    }

    /// All grid points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.volume()).map(move |i| self.point_at(i))
    }
}

/// A lattice point with 1-based coordinates. Unused trailing slots stay zero,
/// so the derived ordering is lexicographic within one dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl GridPoint {
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "point dimension {} unsupported",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self { coords: c, dim: coords.len() as u8 }
    }

    pub fn xy(x: i32, y: i32) -> Self {
        Self { coords: [x, y, 0], dim: 2 }
    }

    fn from_array(coords: [i32; MAX_DIM], d: usize) -> Self {
        Self { coords, dim: d as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    pub fn x(&self) -> i32 {
        self.coords[0]
    }

    pub fn y(&self) -> i32 {
        self.coords[1]
    }
}

impl Serialize for GridPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = Vec::<i32>::deserialize(d)?;
        if c.is_empty() || c.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!("point dimension {} unsupported", c.len())));
        }
        Ok(GridPoint::new(&c))
    }
}

impl fmt::Debug for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A subset of `[n]^d`, kept in lexicographic order.
///
/// Serializes as `{"n": .., "d": .., "points": [[x, ..], ..]}` with 1-based
/// coordinates in lexicographic order. Reading rejects points outside the
/// grid, points of the wrong dimension, and duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PointSetFile", try_from = "PointSetFile")]
pub struct PointSet {
    grid: GridParams,
    points: BTreeSet<GridPoint>,
}

impl PointSet {
    pub fn empty(grid: GridParams) -> Self {
        Self { grid, points: BTreeSet::new() }
    }

    pub fn full(grid: GridParams) -> Self {
        Self { grid, points: grid.points().collect() }
    }

    pub fn from_points<I>(grid: GridParams, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = GridPoint>,
    {
        let mut set = Self::empty(grid);
        for p in points {
            set.insert(p)?;
        }
        Ok(set)
    }

    /// Builds a set from a dense membership mask indexed by [`GridParams::index_of`].
    pub fn from_mask(grid: GridParams, mask: &[bool]) -> Self {
        debug_assert_eq!(mask.len(), grid.volume());
        let points = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| grid.point_at(i))
            .collect();
        Self { grid, points }
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.grid.volume()];
        for p in &self.points {
            mask[self.grid.index_of(p)] = true;
        }
        mask
    }

    pub fn grid(&self) -> GridParams {
        self.grid
    }

    pub fn insert(&mut self, p: GridPoint) -> Result<bool> {
        if !self.grid.contains(&p) {
            return Err(Error::OutOfGrid {
                point: p.coords().to_vec(),
                n: self.grid.n,
                d: self.grid.d,
            });
        }
        Ok(self.points.insert(p))
    }

    pub fn remove(&mut self, p: &GridPoint) -> bool {
        self.points.remove(p)
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        self.points.contains(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GridPoint> + '_ {
        self.points.iter()
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.grid == other.grid && self.points.is_subset(&other.points)
    }

    /// Union of disjoint sets; `None` if any point is shared or grids differ.
    pub fn disjoint_union(&self, other: &PointSet) -> Option<PointSet> {
        if self.grid != other.grid || !self.points.is_disjoint(&other.points) {
            return None;
        }
        let mut out = self.clone();
        out.points.extend(other.points.iter().copied());
        Some(out)
    }

    /// Counts per value of coordinate `axis` (index `v - 1` holds the count for value `v`).
    pub fn axis_counts(&self, axis: usize) -> Vec<u32> {
        let mut counts = vec![0u32; self.grid.n as usize];
        for p in &self.points {
            counts[p.coords()[axis] as usize - 1] += 1;
        }
        counts
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSetFile {
    n: u32,
    d: usize,
    points: Vec<GridPoint>,
}

impl From<PointSet> for PointSetFile {
    fn from(set: PointSet) -> Self {
        Self { n: set.grid.n, d: set.grid.d, points: set.points.into_iter().collect() }
    }
}

impl TryFrom<PointSetFile> for PointSet {
    type Error = Error;

    fn try_from(file: PointSetFile) -> Result<Self> {
        let grid = GridParams::new(file.n, file.d)?;
        let mut set = PointSet::empty(grid);
        for p in file.points {
            if p.dim() != grid.d {
                return Err(Error::Format(format!("point {p:?} does not have dimension {}", grid.d)));
            }
            if !set.insert(p)? {
                return Err(Error::Format(format!("duplicate point {p:?}")));
            }
        }
        Ok(set)
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a GridPoint;
    type IntoIter = std::collections::btree_set::Iter<'a, GridPoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = GridParams::new(5, 3).unwrap();
        for i in 0..g.volume() {
            let p = g.point_at(i);
            assert!(g.contains(&p));
            assert_eq!(g.index_of(&p), i);
        }
    }

    #[test]
    fn points_are_lexicographic() {
        let g = GridParams::plane(3).unwrap();
        let pts: Vec<_> = g.points().collect();
        let mut sorted = pts.clone();
        sorted.sort();
        assert_eq!(pts, sorted);
        assert_eq!(pts[0], GridPoint::xy(1, 1));
        assert_eq!(pts[1], GridPoint::xy(1, 2));
    }

    #[test]
    fn rejects_points_outside_grid() {
        let g = GridParams::plane(4).unwrap();
        let mut s = PointSet::empty(g);
        assert!(s.insert(GridPoint::xy(0, 1)).is_err());
        assert!(s.insert(GridPoint::xy(5, 1)).is_err());
        assert!(s.insert(GridPoint::new(&[1, 1, 1])).is_err());
        assert!(s.insert(GridPoint::xy(4, 4)).unwrap());
        assert!(!s.insert(GridPoint::xy(4, 4)).unwrap());
    }

    #[test]
    fn grid_params_validation() {
        assert!(GridParams::new(1, 2).is_err());
        assert!(GridParams::new(4, 0).is_err());
        assert!(GridParams::new(4, 4).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let g = GridParams::plane(4).unwrap();
        let s = PointSet::from_points(g, [GridPoint::xy(1, 3), GridPoint::xy(4, 2)]).unwrap();
        assert_eq!(PointSet::from_mask(g, &s.mask()), s);
    }
}
