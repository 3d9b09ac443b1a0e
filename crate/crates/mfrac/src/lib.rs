//! Dyadic-analysis toolkit for multilinear fractional operators.
//!
//! The crate provides exact arithmetic for the standard and one-third-shifted
//! dyadic grids, piecewise-constant grid functions and weights on a finite
//! root cube, the multilinear fractional maximal and integral operators,
//! Muckenhoupt-type weight characteristics, stopping-time sparse families
//! with their domination estimates, and power-weight extremal experiments
//! that fit blow-up exponents from an epsilon sweep.
//!
//! Everything is computed on a truncated system: a root box with integer
//! corners carrying a dyadic mesh. All cube geometry is exact rational
//! arithmetic; cell values are `f64`.

pub mod carleson;
pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod exponents;
pub mod geometry;
pub mod grid;
pub mod operators;
pub(crate) mod pyramid;
pub mod sharpness;
pub mod sparse;
pub mod weights;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;

pub use exponents::{ExponentData, WeightMode};
pub use geometry::{covering_cube, cube_at, DyadicCube, Rat, RootSystem, Shift};
pub use grid::{lq_norm, power_ball_integral, GridFunction, OperatorOutput};
pub use sparse::SparseFamily;
pub use weights::{CubeFamily, WeightVector};
