//! Finite element solver for transient anisotropic diffusion that keeps
//! nodal values inside the bounds given by the maximum principle.
//!
//! Time is discretized first. Each backward-Euler step becomes a steady
//! diffusion problem with decay, and its Galerkin form is solved as a convex
//! quadratic program with box constraints. The crate also provides the
//! classical single-field trapezoidal family for comparison, analytic
//! reference solutions, violation and monotone-matrix diagnostics, and error
//! norms for refinement studies.
//!
//! ```no_run
//! use dmpdiffuse::mesh::{generate_structured_tri_mesh, Rect, TriPattern};
//! use dmpdiffuse::problem::ProblemSpec;
//! use dmpdiffuse::timestepping::{run_transient, Scheme, SchemeConfig};
//!
//! let mesh = generate_structured_tri_mesh(21, 21, Rect::UNIT, TriPattern::RightDiagonal)?;
//! let problem = ProblemSpec::slab_2d(0.4, 0.6)?;
//! let cfg = SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, 1e-4);
//! let history = run_transient(&mesh, &problem, cfg, &[])?;
//! assert_eq!(history.total_violations(), 0);
//! # Ok::<(), dmpdiffuse::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod output;
pub mod problem;
pub mod qp;
pub mod sparse;
pub mod timestepping;

pub use error::{Error, Result};
