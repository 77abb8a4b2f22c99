//! Induced Stackelberg equilibrium seeking.
//!
//! A leader picks `y`, a population of followers answers with an equilibrium
//! of a monotone game `VI(F(·; y), Ω)`. When that equilibrium set is not a
//! singleton the follower answer is fixed by a strongly convex selection
//! criterion `φ`, and the leader reaches it by adding a vanishing Tikhonov
//! term `β∇φ` to the followers' game while it runs a two-point zeroth-order
//! descent on `J0(y, x)`.
//!
//! - [`game`]: follower games, feasible regions, selection and leader records.
//! - [`vi`]: projections, extragradient / projected-gradient solvers and the
//!   Tikhonov path.
//! - [`zo`]: sphere sampling, schedules, the estimator and the seeking loop.
//! - [`scenarios`]: the illustrative game, a linear testbed and an energy
//!   community.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod scenarios;
pub mod vi;
pub mod zo;

pub use error::{Error, Result};
pub use game::{
    BlockLayout, FeasibleRegion, FollowerProfile, LeaderDecision, LeaderMetadata, LeaderObjective, MonotonicityClass,
    ParametricGame, RegionBuilder, SelectionFunction, Vector,
};
pub use vi::{
    natural_residual, optimal_selection, solve_regularized, solve_vi, StepRule, TikhonovPathParams, ViSolveParams,
    ViSolveReport,
};
pub use zo::{seek, EstimatorSign, ScheduleParams, SeekOptions, SeekProblem, Trace, TraceRecord};

pub use nalgebra::DVector;
