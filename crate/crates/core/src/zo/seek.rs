use std::fmt;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::game::{LeaderObjective, ParametricGame, SelectionFunction};
use crate::vi::{solve_regularized, ViSolveParams, ViSolveReport};
use crate::zo::{sample_sphere, schedule, two_point_estimate, EstimatorSign, ScheduleParams};

/// The bilevel problem: follower game, selection criterion, leader cost and
/// initial leader decision.
#[derive(Clone, Debug)]
pub struct SeekProblem {
    game: ParametricGame,
    phi: SelectionFunction,
    objective: LeaderObjective,
    y0: DVector<f64>,
}

impl SeekProblem {
    pub fn new(
        game: ParametricGame,
        phi: SelectionFunction,
        objective: LeaderObjective,
        y0: DVector<f64>,
    ) -> Result<Self> {
        check_dim("selection function", game.dim(), phi.dim())?;
        check_dim("leader objective (follower part)", game.dim(), objective.follower_dim())?;
        check_dim(
            "leader objective (leader part)",
            game.leader_dim(),
            objective.leader_dim(),
        )?;
        check_dim("initial leader decision", game.leader_dim(), y0.len())?;
        check_finite("initial leader decision", &y0)?;
        Ok(Self {
            game,
            phi,
            objective,
            y0,
        })
    }

    pub fn game(&self) -> &ParametricGame {
        &self.game
    }

    pub fn phi(&self) -> &SelectionFunction {
        &self.phi
    }

    pub fn objective(&self) -> &LeaderObjective {
        &self.objective
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn leader_dim(&self) -> usize {
        self.game.leader_dim()
    }

    pub fn with_y0(mut self, y0: DVector<f64>) -> Result<Self> {
        check_dim("initial leader decision", self.leader_dim(), y0.len())?;
        self.y0 = y0;
        Ok(self)
    }
}

#[derive(Clone, Debug)]
pub struct SeekOptions {
    /// Inner solve settings shared by both regularized solves; the warm start
    /// is replaced by the previous follower profile.
    pub inner: ViSolveParams,
    pub sign: EstimatorSign,
    /// Run the two inner solves of an iteration on separate threads.
    pub parallel_inner: bool,
}

impl Default for SeekOptions {
    fn default() -> Self {
        Self {
            inner: ViSolveParams::default().with_tol(1e-8),
            sign: EstimatorSign::Descent,
            parallel_inner: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSummary {
    pub residual: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&ViSolveReport> for InnerSummary {
    fn from(r: &ViSolveReport) -> Self {
        Self {
            residual: r.residual,
            tol: r.tol,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub y: DVector<f64>,
    pub v: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub eta: f64,
    pub delta: f64,
    pub beta: f64,
    pub j0: f64,
    pub j0_hat: f64,
    pub g_hat: DVector<f64>,
    pub inner: InnerSummary,
    pub inner_hat: InnerSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeekFault {
    pub k: usize,
    pub message: String,
}

impl fmt::Display for SeekFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iteration {}: {}", self.k, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Leader decision after the last completed update.
    pub final_y: DVector<f64>,
    pub fault: Option<SeekFault>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.fault.is_none()
    }

    pub fn j0_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.j0).collect()
    }

    /// Running minimum of `J0(y_k, x_k)`.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.j0);
                best
            })
            .collect()
    }
}

fn solve_pair(
    problem: &SeekProblem,
    beta: f64,
    y: &DVector<f64>,
    y_hat: &DVector<f64>,
    params: &ViSolveParams,
    parallel: bool,
) -> (Result<ViSolveReport>, Result<ViSolveReport>) {
    let (game, phi) = (&problem.game, &problem.phi);
    if parallel {
        std::thread::scope(|s| {
            let hat = s.spawn(|| solve_regularized(game, phi, beta, y_hat, params));
            let base = solve_regularized(game, phi, beta, y, params);
            let hat = hat
                .join()
                .unwrap_or_else(|_| Err(Error::invalid("inner solve thread panicked")));
            (base, hat)
        })
    } else {
        (
            solve_regularized(game, phi, beta, y, params),
            solve_regularized(game, phi, beta, y_hat, params),
        )
    }
}

/// Zeroth-order seeking loop: perturb the leader on the unit sphere, solve the
/// two regularized follower games, form the two-point estimate and take a
/// step. Faults inside the loop end it early and are recorded on the trace.
pub fn seek<R: Rng + ?Sized>(
    problem: &SeekProblem,
    params: &ScheduleParams,
    iterations: usize,
    rng: &mut R,
    options: &SeekOptions,
) -> Result<Trace> {
    params.validate()?;
    options.inner.validate()?;
    if iterations == 0 {
        return Err(Error::invalid("iteration count K must be at least 1"));
    }
    let m = problem.leader_dim();
    if params.m != m {
        return Err(Error::DimensionMismatch {
            what: "schedule leader dimension",
            expected: m,
            got: params.m,
        });
    }
    if let Some(ell) = problem.objective.metadata().induced_smoothness {
        params.check_smoothness(ell)?;
    }

    let mut y = problem.y0.clone();
    let mut warm: Option<DVector<f64>> = None;
    let mut records = Vec::with_capacity(iterations);
    let mut fault = None;

    for k in 0..iterations {
        let s = schedule(k, params);
        let v = sample_sphere(m, rng)?;
        let y_hat = &y + &v * s.delta;

        let mut inner = options.inner.clone();
        inner.warm_start = warm.clone();
        let (base, hat) = solve_pair(problem, s.beta, &y, &y_hat, &inner, options.parallel_inner);
        let (base, hat) = match (base, hat) {
            (Ok(b), Ok(h)) => (b, h),
            (Err(e), _) | (_, Err(e)) => {
                fault = Some(SeekFault {
                    k,
                    message: e.to_string(),
                });
                break;
            }
        };
        let values = problem
            .objective
            .eval(&y, &base.solution)
            .and_then(|j| Ok((j, problem.objective.eval(&y_hat, &hat.solution)?)));
        let (j0, j0_hat) = match values {
            Ok(p) => p,
            Err(e) => {
                fault = Some(SeekFault {
                    k,
                    message: e.to_string(),
                });
                break;
            }
        };
        let g_hat = two_point_estimate(j0, j0_hat, s.delta, &v, options.sign);
        let y_next = &y - &g_hat * s.eta;
        if y_next.iter().any(|c| !c.is_finite()) {
            fault = Some(SeekFault {
                k,
                message: Error::NonFinite { what: "leader update" }.to_string(),
            });
            break;
        }

        warm = Some(base.solution.clone());
        records.push(TraceRecord {
            k,
            y: y.clone(),
            v,
            y_hat,
            inner: InnerSummary::from(&base),
            inner_hat: InnerSummary::from(&hat),
            x: base.solution,
            x_hat: hat.solution,
            eta: s.eta,
            delta: s.delta,
            beta: s.beta,
            j0,
            j0_hat,
            g_hat,
        });
        y = y_next;
    }

    Ok(Trace {
        records,
        final_y: y,
        fault,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_monotone_testbed, TestbedConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn testbed() -> SeekProblem {
        build_monotone_testbed(TestbedConfig::default()).unwrap().into_problem()
    }

    fn params(eta_bar: f64) -> ScheduleParams {
        ScheduleParams::new(eta_bar, 0.5, 1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn single_step_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = seek(&testbed(), &params(0.1), 1, &mut rng, &SeekOptions::default()).unwrap();
        assert_eq!(t.len(), 1);
        let r = &t.records[0];
        assert_eq!(r.y_hat, &r.y + &r.v * r.delta);
        assert!((r.v.norm() - 1.0).abs() <= 1e-12);
        assert_eq!(t.final_y, &r.y - &r.g_hat * r.eta);
    }

    #[test]
    fn zero_step_freezes_leader() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = testbed();
        let t = seek(&p, &params(0.0), 50, &mut rng, &SeekOptions::default()).unwrap();
        assert!(t.records.iter().all(|r| r.y == *p.y0()));
        assert_eq!(t.final_y, *p.y0());
    }

    #[test]
    fn same_seed_same_trace() {
        let p = testbed();
        let run = |parallel| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let opts = SeekOptions {
                parallel_inner: parallel,
                ..Default::default()
            };
            seek(&p, &params(1.0 / 6.0), 40, &mut rng, &opts).unwrap()
        };
        let a = run(false);
        assert_eq!(a, run(false));
        assert_eq!(a, run(true));
    }

    #[test]
    fn inner_budget_fault_keeps_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = SeekOptions {
            inner: ViSolveParams::default().with_tol(1e-14).with_max_iterations(1),
            ..Default::default()
        };
        let t = seek(&testbed(), &params(0.1), 10, &mut rng, &opts).unwrap();
        let f = t.fault.clone().expect("fault expected");
        assert_eq!(f.k, t.len());
        assert!(f.message.contains("exhausted"));
    }

    #[test]
    fn rejects_bad_setup() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = testbed();
        assert!(seek(&p, &params(0.1), 0, &mut rng, &SeekOptions::default()).is_err());
        let wrong_m = ScheduleParams::new(0.1, 0.5, 1.0, 1.0, 2).unwrap();
        assert!(seek(&p, &wrong_m, 5, &mut rng, &SeekOptions::default()).is_err());
        // Testbed declares induced smoothness 3, so eta_bar may not exceed 1/6.
        assert!(seek(&p, &params(0.2), 5, &mut rng, &SeekOptions::default()).is_err());
    }

    #[test]
    fn ascent_sign_flips_the_estimate() {
        let p = testbed();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let d = seek(&p, &params(0.1), 1, &mut a, &SeekOptions::default()).unwrap();
        let opts = SeekOptions {
            sign: EstimatorSign::Ascent,
            ..Default::default()
        };
        let q = seek(&p, &params(0.1), 1, &mut b, &opts).unwrap();
        assert_eq!(d.records[0].g_hat, -&q.records[0].g_hat);
    }
}
