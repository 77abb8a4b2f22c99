//! Projection, VI solvers and the Tikhonov selection path.

mod projection;
mod solver;
mod tikhonov;

pub use projection::{project_box, project_polyhedron, PolyhedralProjector, ProjectionOutcome};
pub use solver::{
    estimate_lipschitz, natural_residual, solve_operator, solve_vi, Method, StepRule, ViSolveParams, ViSolveReport,
    DIVERGENCE_STREAK,
};
pub use tikhonov::{optimal_selection, regularized_operator, solve_regularized, SelectionPath, TikhonovPathParams};
