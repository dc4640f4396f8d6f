//! Regularized reduced-order models (Leray, evolve-filter-relax, time-relaxation)
//! built on POD-Galerkin projections of 1D periodic Burgers and Kuramoto–Sivashinsky
//! flows, with differential and higher-order algebraic spatial filters.
//!
//! The pipeline is: [`fom::run_fom`] → [`pod::build_pod`] →
//! [`operators::assemble_operators`] → [`filter::FilterOperator`] →
//! [`rom`] integrators → [`stats`] → [`sweep`].

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appendix;
pub mod error;
pub mod filter;
pub mod fom;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod pod;
pub mod rom;
pub mod sem;
pub mod stats;
pub mod sweep;
pub mod timestep;

pub use error::{RegromError, Result};
