//! Construction and exact verification of point sets in `[n]^2` (and
//! `[n]^d`) with few points on every line or affine section.
//!
//! The construction subsamples the grid in stages, repairing violated lines
//! by Moser–Tardos resampling, and finishes with a max-flow regularization
//! that leaves exactly `k` points in every row and column. Every verdict the
//! crate reports comes from an exact integer check.

pub mod composer;
pub mod construct;
pub mod error;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod pipeline2d;
pub mod pipeline_hd;
pub mod point;
pub mod regularizer;
pub mod resample;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Line, LineStats, Weight};
pub use point::{GridParams, GridPoint, PointSet};
