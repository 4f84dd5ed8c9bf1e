//! Equivalence testing for simulator-versus-headset rating studies.
//!
//! Each participant rates a design variant in a context twice: once on the
//! simulated video and once through the headset. [`build_grid`] pairs those
//! ratings, runs [`tost_paired`] on the differences per (context, variant,
//! dimension), and colors every (context, dimension) cell by how many of the
//! two variants came out equivalent.

mod grid;
pub mod special;
mod tost;

use thiserror::Error;

pub use grid::{
    build_grid, read_ratings, read_ratings_from, CellColor, Dimension, EquivalenceGrid, GridCell, Indeterminate,
    Method, RatingRecord, UnpairedRecord, Variant,
};
pub use special::{t_cdf, t_sf};
pub use tost::{tost_paired, TostResult};

/// Rating-scale difference treated as practically zero on a 7-point scale.
pub const DEFAULT_BOUND: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 paired differences, got {n}")]
    InsufficientData { n: usize },
    #[error("all {n} differences equal {mean}; variance is zero and the t statistic is undefined")]
    DegenerateVariance { n: usize, mean: f64 },
    #[error("differences must be finite")]
    NonFinite,
    #[error("invalid {name}: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("ratings {path}: line {line}: {message}")]
    Csv { path: String, line: u64, message: String },
}
