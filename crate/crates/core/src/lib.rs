//! Low-rank regularized matrix problems solved by operator splitting.
//!
//! Two proximal operators sit at the center: the exact (non-convex) prox of
//! `k(‖·‖) + χ_{rank ≤ r}` and the prox of its convex envelope. Plugged into
//! Douglas–Rachford or forward–backward splitting they give a heuristic and
//! its convex relaxation; [`certificate`] checks when the two agree.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod error;
pub mod experiment;
pub mod gauge;
pub mod io;
pub mod matrix;
pub mod problem;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use gauge::{Gauge, ScalarFn};
pub use matrix::{svd, svd_r, Matrix, Svd};
pub use problem::ProblemSpec;
pub use prox::{prox_envelope, prox_nonconvex_rank, ObjectiveSpec};
pub use solver::{douglas_rachford, forward_backward, run_pair, SolverConfig, Status};
