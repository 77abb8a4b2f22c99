use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::game::{MonotonicityClass, ParametricGame, PseudogradientFn, SelectionFunction};
use crate::vi::solver::{solve_operator, Method, ViSolveParams, ViSolveReport};

/// `(x, y) ↦ F(x; y) + β∇φ(x)`. With `beta == 0` the game's own oracle is
/// returned.
pub fn regularized_operator(game: &ParametricGame, phi: &SelectionFunction, beta: f64) -> Result<PseudogradientFn> {
    check_dim("selection function", game.dim(), phi.dim())?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta must be finite and nonnegative"));
    }
    if beta == 0.0 {
        return Ok(game.pseudogradient().clone());
    }
    let f = game.pseudogradient().clone();
    let grad = phi.gradient_fn().clone();
    Ok(Arc::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        f(x, y) + grad(x) * beta
    }))
}

/// The unique solution `x_β(y)` of `VI(F + β∇φ, Ω)`.
///
/// Always solved by extragradient: the regularized operator is only
/// `βμ`-strongly monotone and a projected-gradient step of `βμ/L²` would
/// stall as `β → 0`.
pub fn solve_regularized(
    game: &ParametricGame,
    phi: &SelectionFunction,
    beta: f64,
    y: &DVector<f64>,
    params: &ViSolveParams,
) -> Result<ViSolveReport> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta must be positive for a regularized solve"));
    }
    if game.class() == MonotonicityClass::Unverified {
        return Err(Error::UnsupportedClass(game.class().to_string()));
    }
    check_dim("leader decision", game.leader_dim(), y.len())?;
    let op = regularized_operator(game, phi, beta)?;
    let y = y.clone();
    solve_operator(
        &move |x: &DVector<f64>| op(x, &y),
        game.region(),
        Method::Extragradient,
        params,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct TikhonovPathParams {
    pub beta0: f64,
    /// Geometric decay `ρ ∈ (0, 1)` of `β_j = β0 ρ^j`.
    pub decay: f64,
    /// Stop once consecutive stage solutions are this close.
    pub path_tol: f64,
    pub tol_base: f64,
    pub tol_scale: f64,
    /// Lower clamp for the stage tolerance, kept above round-off.
    pub tol_floor: f64,
    pub max_stages: usize,
    /// Iteration budget and step rule for every stage; `tol` and `warm_start`
    /// are overridden per stage.
    pub inner: ViSolveParams,
}

impl Default for TikhonovPathParams {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            decay: 0.5,
            path_tol: 1e-6,
            tol_base: 1e-8,
            tol_scale: 1e-2,
            tol_floor: 1e-13,
            max_stages: 60,
            inner: ViSolveParams::default().with_max_iterations(2_000_000),
        }
    }
}

impl TikhonovPathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::invalid("beta0 must be positive"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("decay must lie in (0, 1)"));
        }
        if !(self.path_tol > 0.0) {
            return Err(Error::invalid("path_tol must be positive"));
        }
        if !(self.tol_base > 0.0 && self.tol_scale > 0.0 && self.tol_floor > 0.0) {
            return Err(Error::invalid("stage tolerance parameters must be positive"));
        }
        if self.max_stages < 2 {
            return Err(Error::invalid("max_stages must be at least 2"));
        }
        Ok(())
    }

    /// Inner residual tolerance at regularization level `beta`:
    /// `max(tol_floor, min(tol_base, β² tol_scale))`.
    pub fn stage_tolerance(&self, beta: f64) -> f64 {
        self.tol_base.min(beta * beta * self.tol_scale).max(self.tol_floor)
    }
}

#[derive(Clone, Debug)]
pub struct SelectionPath {
    /// Last stage solution, the approximation of `x*φ(y)`.
    pub solution: DVector<f64>,
    pub betas: Vec<f64>,
    /// `‖x_{β_{j+1}} − x_{β_j}‖` for consecutive stages.
    pub gaps: Vec<f64>,
    pub stages: Vec<ViSolveReport>,
}

impl SelectionPath {
    pub fn beta_reached(&self) -> f64 {
        *self.betas.last().unwrap()
    }
}

/// Follow the warm-started Tikhonov path `β_j = β0 ρ^j` until consecutive
/// solutions agree to `path_tol`.
pub fn optimal_selection(
    game: &ParametricGame,
    phi: &SelectionFunction,
    y: &DVector<f64>,
    path: &TikhonovPathParams,
) -> Result<SelectionPath> {
    path.validate()?;
    let mut betas = Vec::new();
    let mut gaps = Vec::new();
    let mut stages: Vec<ViSolveReport> = Vec::new();
    let mut beta = path.beta0;
    for _ in 0..path.max_stages {
        let mut inner = path.inner.clone().with_tol(path.stage_tolerance(beta));
        if let Some(prev) = stages.last() {
            inner.warm_start = Some(prev.solution.clone());
        }
        let rep = solve_regularized(game, phi, beta, y, &inner)?;
        betas.push(beta);
        if let Some(prev) = stages.last() {
            let gap = (&rep.solution - &prev.solution).norm();
            gaps.push(gap);
            if gap <= path.path_tol {
                let solution = rep.solution.clone();
                stages.push(rep);
                return Ok(SelectionPath {
                    solution,
                    betas,
                    gaps,
                    stages,
                });
            }
        }
        stages.push(rep);
        beta *= path.decay;
    }
    Err(Error::PathNotConverged {
        stages: path.max_stages,
        beta: *betas.last().unwrap(),
        gap: gaps.last().copied().unwrap_or(f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{BlockLayout, RegionBuilder};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn testbed() -> ParametricGame {
        let region = RegionBuilder::uniform_box(2, -100.0, 100.0).build().unwrap();
        ParametricGame::new(
            BlockLayout::scalar(2).unwrap(),
            1,
            region,
            Arc::new(|x: &DVector<f64>, y: &DVector<f64>| v(&[x[0] - x[1] - y[0], x[1] - x[0] + y[0]])),
        )
        .unwrap()
        .with_class(MonotonicityClass::Monotone)
        .unwrap()
    }

    #[test]
    fn zero_beta_is_identity() {
        let g = testbed();
        let phi = SelectionFunction::half_squared_norm(2);
        let op = regularized_operator(&g, &phi, 0.0).unwrap();
        for p in [v(&[0.0, 0.0]), v(&[1.5, -2.0]), v(&[3.0, 7.0])] {
            let y = v(&[0.7]);
            assert_eq!(op(&p, &y), g.eval_pseudogradient(&p, &y).unwrap());
        }
    }

    #[test]
    fn regularized_value_at_origin() {
        let g = testbed();
        let phi = SelectionFunction::half_squared_norm(2);
        let op = regularized_operator(&g, &phi, 0.1).unwrap();
        assert_eq!(op(&v(&[0.0, 0.0]), &v(&[1.0])), v(&[-1.0, 1.0]));
        let op = regularized_operator(&g, &phi, 0.1).unwrap();
        let x = v(&[0.2, 0.3]);
        let expect = g.eval_pseudogradient(&x, &v(&[1.0])).unwrap() + phi.gradient(&x).unwrap() * 0.1;
        assert_eq!(op(&x, &v(&[1.0])), expect);
    }

    #[test]
    fn regularized_matches_linear_solve() {
        let g = testbed();
        let phi = SelectionFunction::half_squared_norm(2);
        for beta in [0.1, 1.0] {
            let r = solve_regularized(&g, &phi, beta, &v(&[1.0]), &ViSolveParams::default().with_tol(1e-12)).unwrap();
            let t = 1.0 / (2.0 + beta);
            assert!((r.solution - v(&[t, -t])).amax() < 1e-10);
        }
    }

    #[test]
    fn large_beta_pulls_to_anchor() {
        let g = testbed();
        let phi = SelectionFunction::weighted_anchor(v(&[0.5, 0.5]), v(&[3.0, -4.0])).unwrap();
        let r = solve_regularized(&g, &phi, 1e6, &v(&[1.0]), &ViSolveParams::default().with_tol(1e-6)).unwrap();
        assert!((r.solution - v(&[3.0, -4.0])).amax() < 1e-3);
    }

    #[test]
    fn selection_is_min_norm_point() {
        let g = testbed();
        let phi = SelectionFunction::half_squared_norm(2);
        let path = optimal_selection(&g, &phi, &v(&[1.0]), &TikhonovPathParams::default()).unwrap();
        assert!((&path.solution - v(&[0.5, -0.5])).amax() < 1e-5);
        assert_eq!(path.gaps.len() + 1, path.betas.len());
        assert!(*path.gaps.last().unwrap() <= 1e-6);
    }

    #[test]
    fn stage_tolerance_rule() {
        let p = TikhonovPathParams::default();
        assert_eq!(p.stage_tolerance(1.0), 1e-8);
        assert!((p.stage_tolerance(1e-4) - 1e-10).abs() < 1e-24);
        assert_eq!(p.stage_tolerance(1e-9), 1e-13);
    }

    #[test]
    fn exhausted_path_reports_progress() {
        let g = testbed();
        let phi = SelectionFunction::half_squared_norm(2);
        let p = TikhonovPathParams {
            max_stages: 3,
            ..Default::default()
        };
        match optimal_selection(&g, &phi, &v(&[1.0]), &p) {
            Err(Error::PathNotConverged { stages, beta, gap }) => {
                assert_eq!(stages, 3);
                assert_eq!(beta, 0.25);
                assert!(gap > 1e-6);
            }
            other => panic!("expected path failure, got {other:?}"),
        }
    }

    #[test]
    fn unverified_game_is_rejected() {
        let g = testbed().with_class(MonotonicityClass::Unverified).unwrap();
        let phi = SelectionFunction::half_squared_norm(2);
        assert!(matches!(
            solve_regularized(&g, &phi, 0.5, &v(&[1.0]), &ViSolveParams::default()),
            Err(Error::UnsupportedClass(_))
        ));
    }
}
