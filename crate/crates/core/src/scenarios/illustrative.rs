//! One leader, two scalar followers with a continuum of interior equilibria.
//!
//! `J1 = ½a x1² + x1x2`, `J2 = ½x2² + a x1x2` with `a = y + ε`, and leader
//! cost `J0 = y² + y(x1 + x2)`. For every `y` the interior equilibria form
//! the line `x2 = −a x1`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    BlockLayout, LeaderMetadata, LeaderObjective, MonotonicityClass, ParametricGame, RegionBuilder, SelectionFunction,
};
use crate::zo::SeekProblem;

/// Which closed form is used for the selected first-follower action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InducedMap {
    /// Minimiser of `φ` over the interior equilibrium line:
    /// `x1 = c / (1 + w (y+ε)²)`.
    #[default]
    PhiMinimizer,
    /// `x1 = c / (1 + w y²)`, which drops `ε` from the coupling.
    Unshifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IllustrativeConfig {
    pub epsilon: f64,
    pub x1_bounds: [f64; 2],
    pub x2_bounds: [f64; 2],
    /// `φ(x) = (x1 − phi_anchor)² + phi_weight · x2²`.
    pub phi_anchor: f64,
    pub phi_weight: f64,
    pub y0: f64,
    pub induced_map: InducedMap,
}

impl Default for IllustrativeConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.5,
            x1_bounds: [-1e3, 1e3],
            x2_bounds: [-1e3, 1e3],
            phi_anchor: 1.0,
            phi_weight: 100.0,
            y0: 1.0,
            induced_map: InducedMap::PhiMinimizer,
        }
    }
}

impl IllustrativeConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.epsilon,
            self.phi_anchor,
            self.phi_weight,
            self.y0,
            self.x1_bounds[0],
            self.x1_bounds[1],
            self.x2_bounds[0],
            self.x2_bounds[1],
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("illustrative config values must be finite"));
        }
        if self.x1_bounds[0] >= self.x1_bounds[1] || self.x2_bounds[0] >= self.x2_bounds[1] {
            return Err(Error::invalid("illustrative boxes need lo < hi"));
        }
        if !(self.phi_weight > 0.0) {
            return Err(Error::invalid("phi_weight must be positive"));
        }
        Ok(())
    }
}

/// Sequence of exogenous first-follower actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceGenerator {
    Constant(f64),
    Cycle(Vec<f64>),
}

impl Default for SequenceGenerator {
    fn default() -> Self {
        SequenceGenerator::Cycle(vec![0.5, 1.5])
    }
}

impl SequenceGenerator {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            SequenceGenerator::Constant(c) => *c,
            SequenceGenerator::Cycle(values) => values[k % values.len()],
        }
    }
}

/// How the leader forms its gradient.
#[derive(Clone, Debug, PartialEq)]
pub enum Regime {
    /// Followers pick `x1` from an exogenous sequence; the leader treats it
    /// as fixed.
    Oscillating(SequenceGenerator),
    /// Followers play the φ-selected equilibrium; the leader still treats
    /// `x1` as fixed.
    Inexact,
    /// Followers play the φ-selected equilibrium and the leader
    /// differentiates through the induced map.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeRecord {
    pub k: usize,
    pub y: f64,
    pub x: [f64; 2],
    pub grad: f64,
    pub j0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeTrace {
    pub records: Vec<RegimeRecord>,
    pub final_y: f64,
    pub fault: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvergenceReport {
    pub y_converged: bool,
    pub x1_converged: bool,
    /// False when `y` settles while `x1` does not, which the necessary
    /// condition rules out.
    pub consistent: bool,
}

/// Built illustrative scenario with its closed-form oracles.
#[derive(Clone, Debug)]
pub struct Illustrative {
    config: IllustrativeConfig,
    phi: SelectionFunction,
    objective: LeaderObjective,
}

/// Central-difference step for the induced map and the exact gradient.
fn fd_step(y: f64) -> f64 {
    1e-4 * (1.0 + y.abs())
}

pub fn build_illustrative(config: IllustrativeConfig) -> Result<Illustrative> {
    config.validate()?;
    let phi = SelectionFunction::weighted_anchor(
        DVector::from_vec(vec![1.0, config.phi_weight]),
        DVector::from_vec(vec![config.phi_anchor, 0.0]),
    )?;
    let objective = LeaderObjective::new(
        1,
        2,
        Arc::new(|y: &DVector<f64>, x: &DVector<f64>| y[0] * y[0] + y[0] * (x[0] + x[1])),
    )
    .with_metadata(LeaderMetadata::default());
    Ok(Illustrative { config, phi, objective })
}

impl Illustrative {
    pub fn config(&self) -> &IllustrativeConfig {
        &self.config
    }

    pub fn phi(&self) -> &SelectionFunction {
        &self.phi
    }

    pub fn objective(&self) -> &LeaderObjective {
        &self.objective
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    /// `a = y + ε`, rejected when nonpositive.
    pub fn coupling(&self, y: f64) -> Result<f64> {
        let a = y + self.config.epsilon;
        if a > 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(Error::Domain(format!("y + epsilon = {a} must be positive")))
        }
    }

    /// The follower game at leader decision `y`. Its operator is monotone only
    /// when `y + ε = 1`; every other `y` is declared unverified.
    pub fn game_at(&self, y: f64) -> Result<ParametricGame> {
        let a = self.coupling(y)?;
        let eps = self.config.epsilon;
        let c = &self.config;
        let region = RegionBuilder::new(
            DVector::from_vec(vec![c.x1_bounds[0], c.x2_bounds[0]]),
            DVector::from_vec(vec![c.x1_bounds[1], c.x2_bounds[1]]),
        )
        .build()?;
        let class = if (a - 1.0).abs() <= 1e-12 {
            MonotonicityClass::Monotone
        } else {
            MonotonicityClass::Unverified
        };
        let game = ParametricGame::new(
            BlockLayout::scalar(2)?,
            1,
            region,
            Arc::new(move |x: &DVector<f64>, y: &DVector<f64>| {
                let a = y[0] + eps;
                if a <= 0.0 {
                    return DVector::from_element(2, f64::NAN);
                }
                DVector::from_vec(vec![a * x[0] + x[1], x[1] + a * x[0]])
            }),
        )?
        .with_class(class)?
        .with_player_costs(Arc::new(move |i, x: &DVector<f64>, y: &DVector<f64>| {
            let a = y[0] + eps;
            if i == 0 {
                0.5 * a * x[0] * x[0] + x[0] * x[1]
            } else {
                0.5 * x[1] * x[1] + a * x[0] * x[1]
            }
        }));
        Ok(game)
    }

    /// Bilevel problem anchored at the configured `y0`.
    pub fn seek_problem(&self) -> Result<SeekProblem> {
        SeekProblem::new(
            self.game_at(self.config.y0)?,
            self.phi.clone(),
            self.objective.clone(),
            DVector::from_element(1, self.config.y0),
        )
    }

    /// The interior equilibrium `(t, −(y+ε)t)`.
    pub fn interior_equilibrium(&self, y: f64, t: f64) -> Result<DVector<f64>> {
        let a = self.coupling(y)?;
        Ok(DVector::from_vec(vec![t, -a * t]))
    }

    pub fn is_interior_equilibrium(&self, y: f64, x: &DVector<f64>, tol: f64) -> Result<bool> {
        let a = self.coupling(y)?;
        let c = &self.config;
        let inside = x[0] > c.x1_bounds[0] && x[0] < c.x1_bounds[1] && x[1] > c.x2_bounds[0] && x[1] < c.x2_bounds[1];
        Ok(inside && (x[1] + a * x[0]).abs() <= tol)
    }

    /// Open interval of first-follower actions whose equilibrium is interior.
    pub fn e1_interior(&self, y: f64) -> Result<(f64, f64)> {
        let a = self.coupling(y)?;
        let c = &self.config;
        let lo = c.x1_bounds[0].max(-c.x2_bounds[1] / a);
        let hi = c.x1_bounds[1].min(-c.x2_bounds[0] / a);
        Ok((lo, hi))
    }

    /// `x*φ(y)` under the configured induced map.
    pub fn selection(&self, y: f64) -> Result<DVector<f64>> {
        let a = self.coupling(y)?;
        let c = &self.config;
        let s = match c.induced_map {
            InducedMap::PhiMinimizer => a,
            InducedMap::Unshifted => y,
        };
        let x1 = c.phi_anchor / (1.0 + c.phi_weight * s * s);
        Ok(DVector::from_vec(vec![x1, -a * x1]))
    }

    pub fn induced_objective(&self, y: f64) -> Result<f64> {
        let x = self.selection(y)?;
        self.objective.eval(&DVector::from_element(1, y), &x)
    }

    /// Leader gradient that treats `x1` as fixed: `2y(1 − x1) + x1(1 − ε)`.
    pub fn inexact_gradient(&self, y: f64, x1: f64) -> f64 {
        2.0 * y * (1.0 - x1) + x1 * (1.0 - self.config.epsilon)
    }

    /// Chain-rule gradient through the induced map, with the map derivative
    /// taken by central differences.
    pub fn exact_gradient(&self, y: f64) -> Result<f64> {
        let h = fd_step(y);
        let x = self.selection(y)?;
        let dx = (self.selection(y + h)? - self.selection(y - h)?) / (2.0 * h);
        Ok(2.0 * y + x[0] + x[1] + y * (dx[0] + dx[1]))
    }

    /// Dense grid search of the induced objective over `[lo, hi]`, skipping
    /// points outside the domain. Returns `(argmin, min)`.
    pub fn grid_minimizer(&self, lo: f64, hi: f64, step: f64) -> Result<(f64, f64)> {
        if !(step > 0.0 && lo < hi) {
            return Err(Error::invalid("grid needs lo < hi and a positive step"));
        }
        let n = ((hi - lo) / step).floor() as usize;
        let mut best = (f64::NAN, f64::INFINITY);
        for i in 0..=n {
            let y = lo + i as f64 * step;
            if let Ok(v) = self.induced_objective(y) {
                if v < best.1 {
                    best = (y, v);
                }
            }
        }
        if best.0.is_nan() {
            return Err(Error::Domain("grid contains no admissible leader decision".into()));
        }
        Ok(best)
    }

    /// Gradient iteration `y ← y − η∇_k` under the given regime. Leaving the
    /// domain ends the run with a fault and a partial trace.
    pub fn run_regime(&self, regime: &Regime, eta: f64, iterations: usize, y0: f64) -> Result<RegimeTrace> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta must be finite and nonnegative"));
        }
        if iterations == 0 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        if let Regime::Oscillating(SequenceGenerator::Cycle(v)) = regime {
            if v.is_empty() {
                return Err(Error::invalid("cycle generator needs at least one value"));
            }
        }
        let mut y = y0;
        let mut records = Vec::with_capacity(iterations);
        let mut fault = None;
        for k in 0..iterations {
            let step = (|| -> Result<RegimeRecord> {
                let a = self.coupling(y)?;
                let (x, grad) = match regime {
                    Regime::Oscillating(seq) => {
                        let x1 = seq.at(k);
                        let (lo, hi) = self.e1_interior(y)?;
                        if !(x1 > lo && x1 < hi) {
                            return Err(Error::Domain(format!(
                                "x1 = {x1} is not an interior equilibrium action at y = {y}"
                            )));
                        }
                        (DVector::from_vec(vec![x1, -a * x1]), self.inexact_gradient(y, x1))
                    }
                    Regime::Inexact => {
                        let x = self.selection(y)?;
                        let g = self.inexact_gradient(y, x[0]);
                        (x, g)
                    }
                    Regime::Exact => (self.selection(y)?, self.exact_gradient(y)?),
                };
                let j0 = self.objective.eval(&DVector::from_element(1, y), &x)?;
                Ok(RegimeRecord {
                    k,
                    y,
                    x: [x[0], x[1]],
                    grad,
                    j0,
                })
            })();
            match step {
                Ok(rec) => {
                    let next = y - eta * rec.grad;
                    records.push(rec);
                    if !next.is_finite() {
                        fault = Some(Error::NonFinite { what: "leader update" }.to_string());
                        break;
                    }
                    y = next;
                }
                Err(e) => {
                    fault = Some(e.to_string());
                    break;
                }
            }
        }
        Ok(RegimeTrace {
            records,
            final_y: y,
            fault,
        })
    }
}

fn last_quarter_range(values: &[f64]) -> f64 {
    let tail = &values[values.len() - values.len() / 4..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

const CONVERGED_RANGE: f64 = 1e-8;

/// Convergence diagnosis of a regime trace: a sequence counts as converged
/// when its last-quarter range is below `1e-8`.
pub fn check_convergence(trace: &RegimeTrace) -> Result<ConvergenceReport> {
    if trace.records.len() < 200 {
        return Err(Error::invalid(format!(
            "convergence check needs at least 200 records, got {}",
            trace.records.len()
        )));
    }
    let ys: Vec<f64> = trace.records.iter().map(|r| r.y).collect();
    let x1s: Vec<f64> = trace.records.iter().map(|r| r.x[0]).collect();
    let y_converged = last_quarter_range(&ys) < CONVERGED_RANGE;
    let x1_converged = last_quarter_range(&x1s) < CONVERGED_RANGE;
    Ok(ConvergenceReport {
        y_converged,
        x1_converged,
        consistent: !(y_converged && !x1_converged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(eps: f64) -> Illustrative {
        build_illustrative(IllustrativeConfig {
            epsilon: eps,
            ..Default::default()
        })
        .unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn pseudogradient_values() {
        let s = scenario(0.1);
        let g = s.game_at(0.9).unwrap();
        assert_eq!(
            g.eval_pseudogradient(&v(&[2.0, 3.0]), &v(&[0.9])).unwrap(),
            v(&[5.0, 5.0])
        );
        for y in [0.3, 0.9, 4.0] {
            let g = s.game_at(y).unwrap();
            assert_eq!(
                g.eval_pseudogradient(&v(&[0.0, 0.0]), &v(&[y])).unwrap(),
                v(&[0.0, 0.0])
            );
        }
    }

    #[test]
    fn class_depends_on_coupling() {
        let s = scenario(0.1);
        assert_eq!(s.game_at(0.9).unwrap().class(), MonotonicityClass::Monotone);
        assert_eq!(s.game_at(3.9).unwrap().class(), MonotonicityClass::Unverified);
        assert!(matches!(s.game_at(-0.2), Err(Error::Domain(_))));
    }

    #[test]
    fn selection_and_membership() {
        let s = scenario(0.1);
        assert!(s.is_interior_equilibrium(0.9, &v(&[0.3, -0.3]), 1e-12).unwrap());
        let x = s.selection(0.9).unwrap();
        assert!((x[0] - 1.0 / 101.0).abs() < 1e-15);
        assert!((x[1] + 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(s.objective().eval(&v(&[0.9]), &v(&[0.3, -0.3])).unwrap(), 0.81);
    }

    #[test]
    fn unshifted_map_drops_epsilon() {
        let s = build_illustrative(IllustrativeConfig {
            epsilon: 0.1,
            induced_map: InducedMap::Unshifted,
            ..Default::default()
        })
        .unwrap();
        let x = s.selection(0.5).unwrap();
        assert!((x[0] - 1.0 / 26.0).abs() < 1e-15);
        assert!((x[1] + 0.6 / 26.0).abs() < 1e-15);
    }

    #[test]
    fn interior_interval() {
        let s = build_illustrative(IllustrativeConfig {
            epsilon: 1.0,
            x1_bounds: [-10.0, 10.0],
            x2_bounds: [-4.0, 6.0],
            ..Default::default()
        })
        .unwrap();
        // a = 2: need −2 x1 ∈ (−4, 6), i.e. x1 ∈ (−3, 2).
        assert_eq!(s.e1_interior(1.0).unwrap(), (-3.0, 2.0));
    }

    #[test]
    fn exogenous_constant_fixed_point() {
        let s = scenario(1.5);
        let xbar = 0.4;
        let t = s
            .run_regime(&Regime::Oscillating(SequenceGenerator::Constant(xbar)), 0.1, 2000, 1.0)
            .unwrap();
        let target = -xbar * (1.0 - 1.5) / (2.0 * (1.0 - xbar));
        assert!(t.fault.is_none());
        assert!((t.final_y - target).abs() < 1e-10);
        let r = check_convergence(&t).unwrap();
        assert_eq!(
            r,
            ConvergenceReport {
                y_converged: true,
                x1_converged: true,
                consistent: true
            }
        );
    }

    #[test]
    fn leaving_the_domain_faults() {
        let s = scenario(0.1);
        let t = s
            .run_regime(&Regime::Oscillating(SequenceGenerator::Constant(0.5)), 0.1, 500, 1.0)
            .unwrap();
        assert!(t.fault.is_some());
        assert!(t.records.len() < 500);
    }

    #[test]
    fn short_trace_is_rejected() {
        let s = scenario(1.5);
        let t = s.run_regime(&Regime::Exact, 0.1, 100, 1.0).unwrap();
        assert!(check_convergence(&t).is_err());
    }
}
