use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::game::LeaderObjective;

/// Orientation of the two-point difference.
///
/// `Descent` uses `J0(ŷ, x̂) − J0(y, x)`, whose expectation is the gradient of
/// the sphere-smoothed objective, so `y ← y − ηĝ` descends. `Ascent` flips the
/// difference to `J0(y, x) − J0(ŷ, x̂)`; with the same update this ascends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSign {
    #[default]
    Descent,
    Ascent,
}

/// `(m/δ)(j_hat − j)v` (or its negation under [`EstimatorSign::Ascent`]).
pub fn two_point_estimate(j: f64, j_hat: f64, delta: f64, v: &DVector<f64>, sign: EstimatorSign) -> DVector<f64> {
    let diff = match sign {
        EstimatorSign::Descent => j_hat - j,
        EstimatorSign::Ascent => j - j_hat,
    };
    v * (v.len() as f64 / delta * diff)
}

/// Two-point estimate from leader evaluations at `(y, x)` and `(ŷ, x̂)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient(
    objective: &LeaderObjective,
    y: &DVector<f64>,
    y_hat: &DVector<f64>,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    delta: f64,
    v: &DVector<f64>,
    sign: EstimatorSign,
) -> Result<DVector<f64>> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    check_dim("perturbation direction", y.len(), v.len())?;
    check_dim("perturbed leader decision", y.len(), y_hat.len())?;
    if (v.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("perturbation direction must have unit norm"));
    }
    let expected = y + v * delta;
    if (y_hat - &expected).amax() > 1e-12 * (1.0 + expected.amax()) {
        return Err(Error::invalid("y_hat must equal y + delta * v"));
    }
    let j = objective.eval(y, x)?;
    let j_hat = objective.eval(y_hat, x_hat)?;
    Ok(two_point_estimate(j, j_hat, delta, v, sign))
}
