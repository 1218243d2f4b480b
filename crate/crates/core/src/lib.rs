//! Multiple positive solutions of the logarithmic Schrödinger equation
//!
//! ```text
//! −ε²Δv + V(x)v = v log v²
//! ```
//!
//! computed on the rescaled problem `−Δu + V(εx)u = u log u²` by Nehari-constrained
//! energy minimization, one minimizer per potential well, each confined by a
//! barycenter map to a ball around its well.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod potential;
pub mod precond;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Point};
