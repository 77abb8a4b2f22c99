use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base constants of the step, perturbation and regularization sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eta_bar: f64,
    pub delta_bar: f64,
    pub beta_bar: f64,
    pub alpha: f64,
    /// Leader dimension.
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleValues {
    pub eta: f64,
    pub delta: f64,
    pub beta: f64,
}

impl ScheduleParams {
    pub fn new(eta_bar: f64, delta_bar: f64, beta_bar: f64, alpha: f64, m: usize) -> Result<Self> {
        let p = Self {
            eta_bar,
            delta_bar,
            beta_bar,
            alpha,
            m,
        };
        p.validate()?;
        Ok(p)
    }

    /// `η̄ = 0` is accepted and freezes the leader.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_bar >= 0.0 && self.eta_bar.is_finite()) {
            return Err(Error::invalid("eta_bar must be finite and nonnegative"));
        }
        if !(self.delta_bar > 0.0 && self.delta_bar.is_finite()) {
            return Err(Error::invalid("delta_bar must be positive"));
        }
        if !(self.beta_bar > 0.0 && self.beta_bar.is_finite()) {
            return Err(Error::invalid("beta_bar must be positive"));
        }
        if !(self.alpha > 0.5 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must exceed 0.5"));
        }
        if self.m == 0 {
            return Err(Error::invalid("leader dimension m must be at least 1"));
        }
        Ok(())
    }

    /// Rejects `η̄ > m / (2ℓ̃)` for a declared smoothness constant `ℓ̃`.
    pub fn check_smoothness(&self, ell: f64) -> Result<()> {
        let cap = self.m as f64 / (2.0 * ell);
        if self.eta_bar > cap {
            return Err(Error::invalid(format!(
                "eta_bar = {} exceeds m/(2*ell) = {cap} for ell = {ell}",
                self.eta_bar
            )));
        }
        Ok(())
    }

    pub fn at(&self, k: usize) -> ScheduleValues {
        schedule(k, self)
    }
}

/// `η_k = η̄(k+1)^{-1/2}/m`, `δ_k = δ̄(k+1)^{-1/4}/√m`, `β_k = β̄(k+1)^{-α}`.
pub fn schedule(k: usize, p: &ScheduleParams) -> ScheduleValues {
    let t = (k + 1) as f64;
    let m = p.m as f64;
    ScheduleValues {
        eta: p.eta_bar * t.powf(-0.5) / m,
        delta: p.delta_bar * t.powf(-0.25) / m.sqrt(),
        beta: p.beta_bar * t.powf(-p.alpha),
    }
}

/// `(Σ_{k<K} β_k² η_k δ_k^{-2}) / (Σ_{k<K} η_k)`, the weight of the
/// regularization bias in the stationarity bound.
pub fn time_scale_ratio(p: &ScheduleParams, horizon: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..horizon {
        let s = schedule(k, p);
        num += s.beta * s.beta * s.eta / (s.delta * s.delta);
        den += s.eta;
    }
    num / den
}
