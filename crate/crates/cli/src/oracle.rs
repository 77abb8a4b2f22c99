//! `stackseek oracle`: reference values for a config, written to `oracle.json`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use stackseek_core::scenarios::{build_energy_community, build_illustrative, build_monotone_testbed, InducedMap};
use stackseek_core::{optimal_selection, DVector, TikhonovPathParams};

use crate::config::{ExperimentConfig, ScenarioKind};
use crate::run::DEFAULT_OUT;

pub const ORACLE_FILE: &str = "oracle.json";
pub const GRID_STEP: f64 = 1e-4;
pub const GRID_HI: f64 = 5.0;

/// Leader decision with the selected follower response and leader cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub label: String,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub j0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub scenario: ScenarioKind,
    /// How `y_star` was obtained; `none` when the scenario has no reference
    /// minimiser.
    pub method: String,
    pub y_star: Option<Vec<f64>>,
    pub j0_star: Option<f64>,
    pub points: Vec<OraclePoint>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn compute_oracle(cfg: &ExperimentConfig) -> Result<OracleReport> {
    Ok(match cfg.scenario {
        ScenarioKind::Illustrative => {
            let s = build_illustrative(cfg.illustrative_config())?;
            let eps = s.epsilon();
            let (y, j) = s.grid_minimizer(-eps + GRID_STEP, GRID_HI, GRID_STEP)?;
            let map = match s.config().induced_map {
                InducedMap::PhiMinimizer => "phi_minimizer",
                InducedMap::Unshifted => "unshifted",
            };
            let y0 = s.config().y0;
            OracleReport {
                scenario: cfg.scenario,
                method: format!(
                    "grid over [{}, {GRID_HI}] with step {GRID_STEP:e}, {map} induced map",
                    -eps + GRID_STEP
                ),
                y_star: Some(vec![y]),
                j0_star: Some(j),
                points: vec![
                    OraclePoint {
                        label: "y_star".into(),
                        y: vec![y],
                        x: to_vec(&s.selection(y)?),
                        j0: j,
                    },
                    OraclePoint {
                        label: "y0".into(),
                        y: vec![y0],
                        x: to_vec(&s.selection(y0)?),
                        j0: s.induced_objective(y0)?,
                    },
                ],
            }
        }
        ScenarioKind::Testbed => {
            let t = build_monotone_testbed(cfg.testbed_config())?;
            let y = t.induced_minimizer();
            let j = t.induced_objective(&y)?;
            let y0 = t.problem().y0().clone();
            OracleReport {
                scenario: cfg.scenario,
                method: "closed form".into(),
                y_star: Some(to_vec(&y)),
                j0_star: Some(j),
                points: vec![
                    OraclePoint {
                        label: "y_star".into(),
                        y: to_vec(&y),
                        x: to_vec(&t.selection(&y)?),
                        j0: j,
                    },
                    OraclePoint {
                        label: "y0".into(),
                        y: to_vec(&y0),
                        x: to_vec(&t.selection(&y0)?),
                        j0: t.induced_objective(&y0)?,
                    },
                ],
            }
        }
        ScenarioKind::Energy => {
            let e = build_energy_community(cfg.energy_config())?;
            let p = e.problem();
            let path = TikhonovPathParams::default();
            let mut points = Vec::new();
            for (label, y) in [
                ("y0", p.y0().clone()),
                ("reference_price", DVector::from_vec(e.config().reference_price.clone())),
            ] {
                let x = optimal_selection(p.game(), p.phi(), &y, &path)?.solution;
                points.push(OraclePoint {
                    label: label.into(),
                    y: to_vec(&y),
                    j0: p.objective().eval(&y, &x)?,
                    x: to_vec(&x),
                });
            }
            OracleReport {
                scenario: cfg.scenario,
                method: "none".into(),
                y_star: None,
                j0_star: None,
                points,
            }
        }
    })
}

/// Computes the oracle and writes it to `<out>/oracle.json`.
pub fn write_oracle(cfg: &ExperimentConfig) -> Result<(PathBuf, OracleReport)> {
    let report = compute_oracle(cfg)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path = out.join(ORACLE_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok((path, report))
}
