use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::LeaderObjective;
use crate::zo::Trace;

/// Finite-difference step for the induced objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FdStep {
    /// `h = c (1 + ‖y‖)`.
    Relative(f64),
    Absolute(f64),
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep::Relative(1e-4)
    }
}

impl FdStep {
    pub fn at(&self, y: &DVector<f64>) -> f64 {
        match *self {
            FdStep::Relative(c) => c * (1.0 + y.norm()),
            FdStep::Absolute(h) => h,
        }
    }
}

/// Central-difference gradient of `y ↦ J0(y, x*(y))` for a selection oracle
/// `x*`.
pub fn induced_gradient_fd(
    objective: &LeaderObjective,
    selection: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    y: &DVector<f64>,
    step: FdStep,
) -> Result<DVector<f64>> {
    let h = step.at(y);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let induced = |p: &DVector<f64>| -> Result<f64> { objective.eval(p, &selection(p)?) };
    let mut g = DVector::zeros(y.len());
    let mut p = y.clone();
    for i in 0..y.len() {
        p[i] = y[i] + h;
        let up = induced(&p)?;
        p[i] = y[i] - h;
        let down = induced(&p)?;
        p[i] = y[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// `Σ_k η_k ‖∇̂J0(y_k, x*(y_k))‖² / Σ_k η_k` over the trace records.
///
/// When every recorded step is zero (`η̄ = 0`) the weights fall back to
/// `(k+1)^{-1/2}`, the `η̄ → 0` limit of the normalised step weights.
pub fn stationarity_profile(
    trace: &Trace,
    objective: &LeaderObjective,
    selection: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    step: FdStep,
) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::invalid("stationarity of an empty trace is undefined"));
    }
    let frozen = trace.records.iter().all(|r| r.eta == 0.0);
    let (mut num, mut den) = (0.0, 0.0);
    for r in &trace.records {
        let w = if frozen { ((r.k + 1) as f64).powf(-0.5) } else { r.eta };
        let g = induced_gradient_fd(objective, selection, &r.y, step)?;
        num += w * g.norm_squared();
        den += w;
    }
    Ok(num / den)
}
