use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::game::{FeasibleRegion, MonotonicityClass, ParametricGame};
use crate::vi::PolyhedralProjector;

/// Consecutive residual increases that abort a solve as a class violation.
pub const DIVERGENCE_STREAK: usize = 50;

const LIPSCHITZ_PROBE_SEED: u64 = 0x5EED_115C;
const LIPSCHITZ_RESTARTS: usize = 4;
const LIPSCHITZ_POWER_STEPS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum StepRule {
    /// `0.9 / L̂` for extragradient, `σ / L̂²` for projected gradient, where
    /// `L̂` is a probed local Lipschitz estimate.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViSolveParams {
    pub max_iterations: usize,
    pub step: StepRule,
    /// Natural-residual tolerance.
    pub tol: f64,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for ViSolveParams {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            step: StepRule::Auto,
            tol: 1e-8,
            warm_start: None,
        }
    }
}

impl ViSolveParams {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_warm_start(mut self, x: DVector<f64>) -> Self {
        self.warm_start = Some(x);
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("fixed step size must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViSolveReport {
    pub solution: DVector<f64>,
    /// Natural residual `‖x − Π(x − F(x))‖` at `solution`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Extragradient,
    ProjectedGradient { modulus: f64 },
}

/// `‖x − Π_Ω(x − F(x))‖`.
pub fn natural_residual<F>(op: F, region: &FeasibleRegion, x: &DVector<f64>) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    check_dim("residual point", region.dim(), x.len())?;
    let fx = op(x);
    check_dim("operator output", region.dim(), fx.len())?;
    check_finite("operator", &fx)?;
    let mut proj = PolyhedralProjector::new(region);
    let p = proj.project(&(x - fx), 1e-13)?;
    Ok((x - p).norm())
}

/// Solve `VI(F(·; y), Ω)`: extragradient for monotone games, projected
/// gradient for declared strongly monotone ones.
pub fn solve_vi(game: &ParametricGame, y: &DVector<f64>, params: &ViSolveParams) -> Result<ViSolveReport> {
    check_dim("leader decision", game.leader_dim(), y.len())?;
    let method = match game.class() {
        MonotonicityClass::StronglyMonotone(s) => Method::ProjectedGradient { modulus: s },
        MonotonicityClass::Monotone => Method::Extragradient,
        c @ MonotonicityClass::Unverified => return Err(Error::UnsupportedClass(c.to_string())),
    };
    let f = game.pseudogradient().clone();
    let y = y.clone();
    solve_operator(&move |x: &DVector<f64>| f(x, &y), game.region(), method, params)
}

/// Generic solve loop for a single-argument operator.
pub fn solve_operator(
    op: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    region: &FeasibleRegion,
    method: Method,
    params: &ViSolveParams,
) -> Result<ViSolveReport> {
    params.validate()?;
    let n = region.dim();
    let tol = params.tol;
    let proj_tol = (1e-2 * tol).max(1e-14);
    let mut proj = PolyhedralProjector::new(region);

    let start = match &params.warm_start {
        Some(w) => {
            check_dim("warm start", n, w.len())?;
            check_finite("warm start", w)?;
            proj.project(w, proj_tol)?
        }
        None => region.feasible_point().clone(),
    };
    let eval = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let fx = op(x);
        check_dim("operator output", n, fx.len())?;
        check_finite("operator", &fx)?;
        Ok(fx)
    };

    let step = match (&params.step, method) {
        (StepRule::Fixed(s), _) => *s,
        (StepRule::Auto, Method::Extragradient) => 0.9 / estimate_lipschitz(op, &start),
        (StepRule::Auto, Method::ProjectedGradient { modulus }) => {
            let l = estimate_lipschitz(op, &start).max(modulus);
            modulus / (l * l)
        }
    };
    // For γ ≤ 1, ‖x − Π(x − γF)‖ ≤ r(x); for γ ≥ 1 it is ≤ γ·r(x). Use that
    // as a cheap necessary condition before paying for the exact residual.
    let proxy_scale = step.max(1.0);

    let mut x = start;
    let mut prev_proxy = f64::INFINITY;
    let mut streak = 0usize;
    let mut next_check = 0usize;

    for it in 0..params.max_iterations {
        let fx = eval(&x)?;
        let x_half = proj.project(&(&x - &fx * step), proj_tol)?;
        let proxy = (&x - &x_half).norm();

        if proxy <= tol * proxy_scale && it >= next_check {
            let r = (&x - proj.project(&(&x - &fx), proj_tol)?).norm();
            if r <= tol {
                return Ok(ViSolveReport {
                    solution: x,
                    residual: r,
                    iterations: it,
                    converged: true,
                    tol,
                    step,
                });
            }
            next_check = it + 10;
        }

        if proxy > prev_proxy {
            streak += 1;
            if streak >= DIVERGENCE_STREAK {
                return Err(Error::ClassViolation {
                    iteration: it,
                    streak,
                    residual: proxy,
                });
            }
        } else {
            streak = 0;
        }
        prev_proxy = proxy;

        x = match method {
            Method::Extragradient => {
                let f_half = eval(&x_half)?;
                proj.project(&(&x - &f_half * step), proj_tol)?
            }
            Method::ProjectedGradient { .. } => x_half,
        };
    }

    let fx = eval(&x)?;
    let r = (&x - proj.project(&(&x - &fx), proj_tol)?).norm();
    if r <= tol {
        return Ok(ViSolveReport {
            solution: x,
            residual: r,
            iterations: params.max_iterations,
            converged: true,
            tol,
            step,
        });
    }
    Err(Error::NotConverged(Box::new(ViSolveReport {
        solution: x,
        residual: r,
        iterations: params.max_iterations,
        converged: false,
        tol,
        step,
    })))
}

/// Local Lipschitz estimate of `op` around `x0` from 20 probes: four random
/// directions, each refined by five power-iteration steps on the difference
/// quotient.
pub fn estimate_lipschitz(op: &dyn Fn(&DVector<f64>) -> DVector<f64>, x0: &DVector<f64>) -> f64 {
    let n = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_PROBE_SEED);
    let h = 1e-4 * (1.0 + x0.norm());
    let f0 = op(x0);
    let mut best: f64 = 0.0;
    for _ in 0..LIPSCHITZ_RESTARTS {
        let mut d = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm = d.norm();
        if norm == 0.0 {
            continue;
        }
        d /= norm;
        for _ in 0..LIPSCHITZ_POWER_STEPS {
            let diff = op(&(x0 + &d * h)) - &f0;
            let dn = diff.norm();
            if !dn.is_finite() {
                break;
            }
            best = best.max(dn / h);
            if dn == 0.0 {
                break;
            }
            d = diff / dn;
        }
    }
    best.max(1e-12)
}
