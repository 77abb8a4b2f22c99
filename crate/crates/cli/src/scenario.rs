//! Builds the problem named by a config.

use anyhow::Result;
use stackseek_core::scenarios::{build_energy_community, build_illustrative, build_monotone_testbed, Illustrative};
use stackseek_core::{DVector, SeekProblem};

use crate::config::{ExperimentConfig, ScenarioKind};

/// Selection map `y ↦ x*φ(y)`.
pub type SelectionFn = dyn Fn(&DVector<f64>) -> stackseek_core::Result<DVector<f64>> + Send + Sync;

pub enum Scenario {
    /// Runs one of the fixed-step regimes instead of the seeking loop.
    Illustrative(Illustrative),
    /// A seeking problem, with a closed-form selection map when one exists.
    Seek {
        problem: SeekProblem,
        selection: Option<Box<SelectionFn>>,
    },
}

pub fn build_scenario(cfg: &ExperimentConfig) -> Result<Scenario> {
    Ok(match cfg.scenario {
        ScenarioKind::Illustrative => Scenario::Illustrative(build_illustrative(cfg.illustrative_config())?),
        ScenarioKind::Testbed => {
            let t = build_monotone_testbed(cfg.testbed_config())?;
            let problem = t.problem().clone();
            Scenario::Seek {
                problem,
                selection: Some(Box::new(move |y: &DVector<f64>| t.selection(y))),
            }
        }
        ScenarioKind::Energy => Scenario::Seek {
            problem: build_energy_community(cfg.energy_config())?.into_problem(),
            selection: None,
        },
    })
}
