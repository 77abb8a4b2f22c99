use thiserror::Error;

use crate::vi::ViSolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value produced by {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feasible region is empty: row `{row}` violated by {violation:.3e}")]
    Infeasible { row: String, violation: f64 },

    #[error("projection did not reach tolerance after {sweeps} sweeps (violation {violation:.3e})")]
    ProjectionNotConverged { sweeps: usize, violation: f64 },

    #[error(
        "VI solver exhausted {} iterations (residual {:.3e} > tol {:.3e})",
        .0.iterations, .0.residual, .0.tol
    )]
    NotConverged(Box<ViSolveReport>),

    #[error("declared monotonicity class violated: residual grew for {streak} consecutive iterations (at iteration {iteration}, residual {residual:.3e})")]
    ClassViolation {
        iteration: usize,
        streak: usize,
        residual: f64,
    },

    #[error("solver requires a monotone or strongly monotone game, got class `{0}`")]
    UnsupportedClass(String),

    #[error("Tikhonov path exhausted {stages} stages at beta = {beta:.3e} with gap {gap:.3e}")]
    PathNotConverged { stages: usize, beta: f64, gap: f64 },

    #[error("outside model domain: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

pub(crate) fn check_finite(what: &'static str, v: &nalgebra::DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}
