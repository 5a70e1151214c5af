//! Reconstruction of piecewise constant conductivities on a known pixel
//! partition from finitely many partial-boundary Neumann-to-Dirichlet
//! measurements.
//!
//! The pipeline: [`geometry`] builds meshes, partitions and orderings;
//! [`forward`] solves the Neumann problem (with perfectly insulating and
//! perfectly conducting pixels); [`nd_map`] compresses the Neumann-to-Dirichlet
//! map onto the cosine system of [`basis`]; [`monotonicity`] decides Loewner
//! inequalities; [`reconstruction`] bisects each pixel value in turn; [`cli`]
//! and [`config`] wire it to files.

pub mod basis;
pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod monotonicity;
pub mod nd_map;
pub mod reconstruction;

pub use error::{Error, Result};
