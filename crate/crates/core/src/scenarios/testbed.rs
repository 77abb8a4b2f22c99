//! Linear monotone game with closed-form regularized and selected responses.
//!
//! Each of `pairs` follower pairs plays `F(x; y) = (A + sI)x − (y, −y)` with
//! `A = [[1, −1], [−1, 1]]`, selection `φ = ½‖x‖²` and leader cost
//! `J0 = ‖y − 1‖² + ‖x‖²`. With `s = 0` the equilibria of a pair form the line
//! `x1 − x2 = y`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::game::{
    BlockLayout, LeaderMetadata, LeaderObjective, MonotonicityClass, ParametricGame, RegionBuilder, SelectionFunction,
};
use crate::zo::SeekProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestbedConfig {
    /// Number of follower pairs; also the leader dimension.
    pub pairs: usize,
    /// Diagonal shift `s ≥ 0`; positive values make the game strongly monotone.
    pub shift: f64,
    pub box_radius: f64,
    /// Initial leader decision, broadcast when a single value is given.
    pub y0: Vec<f64>,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            pairs: 1,
            shift: 0.0,
            box_radius: 100.0,
            y0: vec![5.0],
        }
    }
}

impl TestbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::invalid("testbed needs at least one pair"));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::invalid("shift must be finite and nonnegative"));
        }
        if !(self.box_radius > 0.0) {
            return Err(Error::invalid("box_radius must be positive"));
        }
        if !(self.y0.len() == 1 || self.y0.len() == self.pairs) {
            return Err(Error::invalid(format!(
                "y0 must have 1 or {} entries, got {}",
                self.pairs,
                self.y0.len()
            )));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y0 must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Testbed {
    config: TestbedConfig,
    problem: SeekProblem,
}

pub fn build_monotone_testbed(config: TestbedConfig) -> Result<Testbed> {
    config.validate()?;
    let p = config.pairs;
    let s = config.shift;
    let n = 2 * p;
    let region = RegionBuilder::uniform_box(n, -config.box_radius, config.box_radius).build()?;
    let class = if s > 0.0 {
        MonotonicityClass::StronglyMonotone(s)
    } else {
        MonotonicityClass::Monotone
    };
    let game = ParametricGame::new(
        BlockLayout::scalar(n)?,
        p,
        region,
        Arc::new(move |x: &DVector<f64>, y: &DVector<f64>| {
            DVector::from_fn(x.len(), |t, _| {
                let (i, j) = if t % 2 == 0 { (t, t + 1) } else { (t, t - 1) };
                let b = if t % 2 == 0 { y[t / 2] } else { -y[t / 2] };
                (1.0 + s) * x[i] - x[j] - b
            })
        }),
    )?
    .with_class(class)?
    .with_player_costs(Arc::new(move |t, x: &DVector<f64>, y: &DVector<f64>| {
        let (own, other) = if t % 2 == 0 { (x[t], x[t + 1]) } else { (x[t], x[t - 1]) };
        let b = if t % 2 == 0 { y[t / 2] } else { -y[t / 2] };
        0.5 * (1.0 + s) * own * own - own * other - b * own
    }));

    let c = 2.0 + s;
    let meta = LeaderMetadata {
        l2: Some(2.0 * config.box_radius * (n as f64).sqrt()),
        induced_smoothness: Some(2.0 + 4.0 / (c * c)),
        lower_bound: Some(p as f64 * 2.0 / (c * c + 2.0)),
        ..Default::default()
    };
    let objective = LeaderObjective::new(
        p,
        n,
        Arc::new(|y: &DVector<f64>, x: &DVector<f64>| {
            y.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() + x.norm_squared()
        }),
    )
    .with_metadata(meta);
    let y0 = if config.y0.len() == 1 {
        DVector::from_element(p, config.y0[0])
    } else {
        DVector::from_vec(config.y0.clone())
    };
    let problem = SeekProblem::new(game, SelectionFunction::half_squared_norm(n), objective, y0)?;
    Ok(Testbed { config, problem })
}

impl Testbed {
    pub fn config(&self) -> &TestbedConfig {
        &self.config
    }

    pub fn problem(&self) -> &SeekProblem {
        &self.problem
    }

    pub fn into_problem(self) -> SeekProblem {
        self.problem
    }

    fn pair_scale(&self, beta: f64) -> f64 {
        1.0 / (2.0 + self.config.shift + beta)
    }

    /// `x_β(y)`, the regularized equilibrium: `(y_i, −y_i) / (2 + s + β)` per pair.
    pub fn regularized_solution(&self, y: &DVector<f64>, beta: f64) -> Result<DVector<f64>> {
        check_dim("leader decision", self.config.pairs, y.len())?;
        if !(beta >= 0.0) {
            return Err(Error::invalid("beta must be nonnegative"));
        }
        let c = self.pair_scale(beta);
        Ok(DVector::from_fn(2 * y.len(), |t, _| {
            if t % 2 == 0 {
                c * y[t / 2]
            } else {
                -c * y[t / 2]
            }
        }))
    }

    /// `x*φ(y)`, the minimum-norm equilibrium.
    pub fn selection(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.regularized_solution(y, 0.0)
    }

    /// Whether `x` solves the unregularized VI (interior solutions only).
    pub fn is_equilibrium(&self, y: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
        let s = self.config.shift;
        (0..self.config.pairs).all(|i| {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            ((1.0 + s) * a - b - y[i]).abs() <= tol && ((1.0 + s) * b - a + y[i]).abs() <= tol
        })
    }

    pub fn induced_objective(&self, y: &DVector<f64>) -> Result<f64> {
        let x = self.selection(y)?;
        self.problem.objective().eval(y, &x)
    }

    /// `∇ J0(y, x*φ(y)) = 2(y − 1) + 4y/(2+s)²`.
    pub fn induced_gradient(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("leader decision", self.config.pairs, y.len())?;
        let c = 2.0 + self.config.shift;
        Ok(y.map(|v| 2.0 * (v - 1.0) + 4.0 * v / (c * c)))
    }

    /// Stationary point of the induced objective, `y* = 2(2+s)² / (2(2+s)² + 4)`
    /// per coordinate.
    pub fn induced_minimizer(&self) -> DVector<f64> {
        let c2 = (2.0 + self.config.shift).powi(2);
        DVector::from_element(self.config.pairs, 2.0 * c2 / (2.0 * c2 + 4.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn oracle_values() {
        let t = build_monotone_testbed(TestbedConfig::default()).unwrap();
        let g = t.problem().game();
        assert_eq!(
            g.eval_pseudogradient(&v(&[0.0, 0.0]), &v(&[1.0])).unwrap(),
            v(&[-1.0, 1.0])
        );
        let xb = t.regularized_solution(&v(&[1.0]), 0.1).unwrap();
        assert!((xb[0] - 1.0 / 2.1).abs() < 1e-15 && (xb[1] + 1.0 / 2.1).abs() < 1e-15);
        assert_eq!(t.selection(&v(&[1.0])).unwrap(), v(&[0.5, -0.5]));
    }

    #[test]
    fn induced_quantities() {
        let t = build_monotone_testbed(TestbedConfig::default()).unwrap();
        let ystar = t.induced_minimizer();
        assert!((ystar[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(t.induced_gradient(&ystar).unwrap()[0].abs() < 1e-15);
        let j = t.induced_objective(&ystar).unwrap();
        assert!((j - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.problem().objective().metadata().lower_bound, Some(1.0 / 3.0));
        assert_eq!(t.problem().objective().metadata().induced_smoothness, Some(3.0));
    }

    #[test]
    fn multi_pair_layout() {
        let t = build_monotone_testbed(TestbedConfig {
            pairs: 3,
            y0: vec![1.0, 2.0, 3.0],
            ..Default::default()
        })
        .unwrap();
        let y = v(&[1.0, 2.0, 3.0]);
        let x = t.selection(&y).unwrap();
        assert_eq!(x, v(&[0.5, -0.5, 1.0, -1.0, 1.5, -1.5]));
        let f = t.problem().game().eval_pseudogradient(&x, &y).unwrap();
        assert!(f.amax() < 1e-15);
        assert!(t.is_equilibrium(&y, &x, 1e-12));
    }

    #[test]
    fn shift_makes_it_strongly_monotone() {
        let t = build_monotone_testbed(TestbedConfig {
            shift: 0.5,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(t.problem().game().class(), MonotonicityClass::StronglyMonotone(0.5));
        let x = t.selection(&v(&[1.0])).unwrap();
        assert!((x[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(build_monotone_testbed(TestbedConfig {
            pairs: 2,
            y0: vec![1.0, 2.0, 3.0],
            ..Default::default()
        })
        .is_err());
        assert!(build_monotone_testbed(TestbedConfig {
            shift: -1.0,
            ..Default::default()
        })
        .is_err());
    }
}
