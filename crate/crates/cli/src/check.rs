//! `stackseek check`: assumption audits for the configured scenario.

use anyhow::Result;
use stackseek_core::game::{
    check_monotonicity, check_pseudogradient_fd, check_strong_convexity, check_strong_monotonicity,
};
use stackseek_core::{DVector, MonotonicityClass, ParametricGame, SeekProblem, SelectionFunction};

use crate::config::ExperimentConfig;
use crate::scenario::{build_scenario, Scenario};

pub const AUDIT_SAMPLES: usize = 500;
pub const AUDIT_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq)]
pub struct Audit {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Audit {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

fn game_audits(game: &ParametricGame, y: &DVector<f64>, at: &str, out: &mut Vec<Audit>) -> Result<()> {
    let region = game.region();
    let (viol, row) = region.max_violation(region.feasible_point());
    out.push(Audit::new(
        format!("feasibility {at}"),
        region.contains(region.feasible_point(), 1e-8),
        format!(
            "witness violation {viol:.2e}{}",
            row.map(|r| format!(" on `{r}`")).unwrap_or_default()
        ),
    ));
    let m = check_monotonicity(game, y, AUDIT_SAMPLES, AUDIT_SEED)?;
    out.push(Audit::new(
        format!("monotonicity {at}"),
        m.passed,
        format!("min <F(a)-F(b), a-b> = {:.3e} over {} pairs", m.min_inner, m.samples),
    ));
    if let MonotonicityClass::StronglyMonotone(sigma) = game.class() {
        let s = check_strong_monotonicity(game, y, sigma, AUDIT_SAMPLES, AUDIT_SEED)?;
        out.push(Audit::new(
            format!("strong monotonicity {at}"),
            s.passed,
            format!("sigma = {sigma}, min slack {:.3e}", s.min_inner),
        ));
    }
    if game.has_player_costs() {
        let fd = check_pseudogradient_fd(game, y, 50, AUDIT_SEED)?;
        out.push(Audit::new(
            format!("pseudogradient vs cost differences {at}"),
            fd.passed,
            format!("max relative error {:.2e}", fd.max_relative_error),
        ));
    }
    Ok(())
}

fn phi_audit(phi: &SelectionFunction, out: &mut Vec<Audit>) -> Result<()> {
    let c = check_strong_convexity(phi, phi.modulus(), AUDIT_SAMPLES, AUDIT_SEED)?;
    out.push(Audit::new(
        "strong convexity of phi",
        c.passed,
        format!(
            "mu = {}, min relative slack {:.3e}",
            phi.modulus(),
            c.min_relative_slack
        ),
    ));
    Ok(())
}

fn schedule_audit(cfg: &ExperimentConfig, problem: &SeekProblem, out: &mut Vec<Audit>) -> Result<()> {
    let (Some(s), Some(ell)) = (cfg.schedule, problem.objective().metadata().induced_smoothness) else {
        return Ok(());
    };
    let params = s.params(problem.leader_dim())?;
    let r = params.check_smoothness(ell);
    out.push(Audit::new(
        "step size vs induced smoothness",
        r.is_ok(),
        match r {
            Ok(()) => format!(
                "eta_bar = {} <= m / (2 ell) = {}",
                s.eta_bar,
                problem.leader_dim() as f64 / (2.0 * ell)
            ),
            Err(e) => e.to_string(),
        },
    ));
    Ok(())
}

pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<Audit>> {
    let mut audits = Vec::new();
    match build_scenario(cfg)? {
        Scenario::Illustrative(ill) => {
            let y0 = ill.config().y0;
            game_audits(
                &ill.game_at(y0)?,
                &DVector::from_element(1, y0),
                &format!("at y = {y0}"),
                &mut audits,
            )?;
            let y_mono = 1.0 - ill.epsilon();
            if (y_mono - y0).abs() > 1e-12 {
                if let Ok(game) = ill.game_at(y_mono) {
                    game_audits(
                        &game,
                        &DVector::from_element(1, y_mono),
                        &format!("at y = {y_mono}"),
                        &mut audits,
                    )?;
                }
            }
            phi_audit(ill.phi(), &mut audits)?;
        }
        Scenario::Seek { problem, .. } => {
            game_audits(problem.game(), problem.y0(), "at y0", &mut audits)?;
            phi_audit(problem.phi(), &mut audits)?;
            schedule_audit(cfg, &problem, &mut audits)?;
        }
    }
    Ok(audits)
}
