//! Sampling checks for the structural assumptions a game declares.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::game::{FeasibleRegion, ParametricGame, SelectionFunction, Vector};
use crate::vi::PolyhedralProjector;

/// Smallest accepted value of `⟨F(x) − F(x′), x − x′⟩` (after any σ shift).
pub const MONOTONICITY_THRESHOLD: f64 = -1e-10;

/// Half-width used for coordinates whose box bound is infinite.
pub const SAMPLE_RADIUS: f64 = 10.0;

pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
pub const CONVEXITY_REL_SLACK: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub min_inner: f64,
    pub violating_pair: Option<(Vector, Vector)>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ConvexityReport {
    pub samples: usize,
    /// Smallest `(φ(z) − φ(x) − ∇φ(x)ᵀ(z−x) − μ/2‖z−x‖²) / max(1, |φ(x)|, |φ(z)|)`.
    pub min_relative_slack: f64,
    pub violating_pair: Option<(Vector, Vector)>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct FdReport {
    pub points: usize,
    pub max_relative_error: f64,
    pub worst_point: Option<Vector>,
    pub passed: bool,
}

fn sampling_bounds(lo: f64, hi: f64) -> (f64, f64) {
    let l = if lo.is_finite() {
        lo
    } else {
        hi.min(SAMPLE_RADIUS) - 2.0 * SAMPLE_RADIUS
    };
    let h = if hi.is_finite() { hi } else { l + 2.0 * SAMPLE_RADIUS };
    (l, h)
}

fn sample_box(rng: &mut ChaCha8Rng, lo: &Vector, hi: &Vector) -> Vector {
    DVector::from_fn(lo.len(), |i, _| {
        let (l, h) = sampling_bounds(lo[i], hi[i]);
        if l == h {
            l
        } else {
            rng.random_range(l..=h)
        }
    })
}

fn sample_region(rng: &mut ChaCha8Rng, proj: &mut PolyhedralProjector<'_>) -> Result<Vector> {
    let region: &FeasibleRegion = proj.region();
    let z = sample_box(rng, region.lo(), region.hi());
    if region.is_box() {
        Ok(z)
    } else {
        proj.project(&z, 1e-10)
    }
}

/// Monotonicity spot check of `F(·; y)` over `sample_count` feasible pairs.
pub fn check_monotonicity(
    game: &ParametricGame,
    y: &Vector,
    sample_count: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    check_strong_monotonicity(game, y, 0.0, sample_count, seed)
}

/// Like [`check_monotonicity`] but tests `⟨F(x) − F(x′), x − x′⟩ − σ‖x − x′‖²`.
pub fn check_strong_monotonicity(
    game: &ParametricGame,
    y: &Vector,
    sigma: f64,
    sample_count: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be at least 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proj = PolyhedralProjector::new(game.region());
    let mut min_inner = f64::INFINITY;
    let mut worst = None;
    for _ in 0..sample_count {
        let a = sample_region(&mut rng, &mut proj)?;
        let b = sample_region(&mut rng, &mut proj)?;
        let d = &a - &b;
        let inner =
            (game.eval_pseudogradient(&a, y)? - game.eval_pseudogradient(&b, y)?).dot(&d) - sigma * d.norm_squared();
        if inner < min_inner {
            min_inner = inner;
            worst = Some((a, b));
        }
    }
    let passed = min_inner >= MONOTONICITY_THRESHOLD;
    Ok(MonotonicityReport {
        samples: sample_count,
        min_inner,
        violating_pair: if passed { None } else { worst },
        passed,
    })
}

/// Quadratic lower-bound check of `φ` with modulus `mu_claim`, sampling pairs
/// in `[−10, 10]^n`.
pub fn check_strong_convexity(
    phi: &SelectionFunction,
    mu_claim: f64,
    sample_count: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if !(mu_claim > 0.0) {
        return Err(Error::invalid("mu_claim must be positive"));
    }
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be at least 1"));
    }
    let n = phi.dim();
    let lo = DVector::from_element(n, -SAMPLE_RADIUS);
    let hi = DVector::from_element(n, SAMPLE_RADIUS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut worst = None;
    for _ in 0..sample_count {
        let x = sample_box(&mut rng, &lo, &hi);
        let z = sample_box(&mut rng, &lo, &hi);
        let (fx, fz) = (phi.value(&x)?, phi.value(&z)?);
        let d = &z - &x;
        let slack = fz - fx - phi.gradient(&x)?.dot(&d) - 0.5 * mu_claim * d.norm_squared();
        let rel = slack / fx.abs().max(fz.abs()).max(1.0);
        if rel < min_slack {
            min_slack = rel;
            worst = Some((x, z));
        }
    }
    let passed = min_slack >= -CONVEXITY_REL_SLACK;
    Ok(ConvexityReport {
        samples: sample_count,
        min_relative_slack: min_slack,
        violating_pair: if passed { None } else { worst },
        passed,
    })
}

fn relative_error(fd: &Vector, analytic: &Vector) -> f64 {
    (fd - analytic).amax() / analytic.amax().max(1.0)
}

/// Central-difference check of a gradient oracle at `points` random points of
/// the box `[lo, hi]`.
pub fn check_gradient_fd(
    value: &dyn Fn(&Vector) -> f64,
    gradient: &dyn Fn(&Vector) -> Vector,
    lo: &Vector,
    hi: &Vector,
    points: usize,
    seed: u64,
) -> Result<FdReport> {
    check_dim("sampling box", lo.len(), hi.len())?;
    let n = lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_err: f64 = 0.0;
    let mut worst = None;
    for _ in 0..points {
        let x = sample_box(&mut rng, lo, hi);
        let g = gradient(&x);
        check_dim("gradient output", n, g.len())?;
        let fd = DVector::from_fn(n, |j, _| {
            let mut p = x.clone();
            p[j] += FD_STEP;
            let up = value(&p);
            p[j] = x[j] - FD_STEP;
            (up - value(&p)) / (2.0 * FD_STEP)
        });
        let e = relative_error(&fd, &g);
        if !(e <= worst_err) {
            worst_err = e;
            worst = Some(x);
        }
    }
    let passed = worst_err <= FD_REL_TOL;
    Ok(FdReport {
        points,
        max_relative_error: worst_err,
        worst_point: if passed { None } else { worst },
        passed,
    })
}

/// Checks `F(x; y)` against central differences of the player cost oracles,
/// `F_j ≈ ∂J_i/∂x_j` for every coordinate `j` of block `i`.
pub fn check_pseudogradient_fd(game: &ParametricGame, y: &Vector, points: usize, seed: u64) -> Result<FdReport> {
    if !game.has_player_costs() {
        return Err(Error::invalid("game has no player cost oracles to differentiate"));
    }
    let layout = game.layout().clone();
    let cost = |i: usize, x: &Vector| game.player_cost(i, x, y).unwrap_or(f64::NAN);
    let region = game.region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_err: f64 = 0.0;
    let mut worst = None;
    for _ in 0..points {
        let x = sample_box(&mut rng, region.lo(), region.hi());
        let f = game.eval_pseudogradient(&x, y)?;
        let mut fd = DVector::zeros(x.len());
        for i in 0..layout.players() {
            for j in layout.range(i) {
                let mut p = x.clone();
                p[j] += FD_STEP;
                let up = cost(i, &p);
                p[j] = x[j] - FD_STEP;
                fd[j] = (up - cost(i, &p)) / (2.0 * FD_STEP);
            }
        }
        let e = relative_error(&fd, &f);
        if !(e <= worst_err) {
            worst_err = e;
            worst = Some(x);
        }
    }
    let passed = worst_err <= FD_REL_TOL;
    Ok(FdReport {
        points,
        max_relative_error: worst_err,
        worst_point: if passed { None } else { worst },
        passed,
    })
}
