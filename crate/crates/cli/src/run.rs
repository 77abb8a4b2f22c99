//! `stackseek run`: executes a config and writes traces, summary and metrics.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stackseek_core::scenarios::{Regime, SequenceGenerator};
use stackseek_core::vi::optimal_selection;
use stackseek_core::zo::{induced_gradient_fd, stationarity_profile, FdStep};
use stackseek_core::{seek, DVector, EstimatorSign, SeekProblem, TikhonovPathParams, Trace};

use crate::config::{ConfigError, ExperimentConfig, RegimeKind, ScenarioKind};
use crate::output::{write_jsonl, write_summary, RegimeLine, SeekLine, SummaryRow};
use crate::scenario::{build_scenario, Scenario, SelectionFn};

pub const DEFAULT_OUT: &str = "out";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METRICS_FILE: &str = "metrics.json";

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub ascent_sign: bool,
}

impl RunOverrides {
    pub fn apply(&self, cfg: &ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
        let mut c = cfg.clone();
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(k) = self.iterations {
            c.iterations = k;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        if let Some(r) = self.replicates {
            c.replicates = r;
        }
        if self.ascent_sign {
            c.estimator.sign = EstimatorSign::Ascent;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub seed: u64,
    pub trace_file: String,
    pub records: usize,
    pub final_j0: Option<f64>,
    pub best_j0: Option<f64>,
    pub final_y: Vec<f64>,
    pub stationarity: Option<f64>,
    pub inner_iterations: usize,
    pub wall_clock_s: f64,
    pub fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: ScenarioKind,
    pub regime: Option<RegimeKind>,
    pub iterations: usize,
    pub summary_file: String,
    pub replicates: Vec<ReplicateMetrics>,
    pub wall_clock_s: f64,
}

impl RunMetrics {
    pub fn faulted(&self) -> bool {
        self.replicates.iter().any(|r| r.fault.is_some())
    }
}

struct ReplicateOutput {
    metrics: ReplicateMetrics,
    rows: Vec<SummaryRow>,
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.jsonl")
}

/// Runs every replicate (seeds `seed, seed+1, …`), writes one trace per
/// replicate, the aggregated summary and `metrics.json`. A fault in any
/// replicate still produces all files; check [`RunMetrics::faulted`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunMetrics> {
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let scenario = build_scenario(cfg)?;
    let start = Instant::now();

    let seeds: Vec<u64> = (0..cfg.replicates as u64).map(|r| cfg.seed + r).collect();
    let results: Vec<Result<ReplicateOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let (scenario, out) = (&scenario, out.as_path());
                s.spawn(move || run_replicate(cfg, scenario, seed, out))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    });
    let outputs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let rows: Vec<Vec<SummaryRow>> = outputs.iter().map(|o| o.rows.clone()).collect();
    let summary = out.join(SUMMARY_FILE);
    write_summary(&summary, &SummaryRow::aggregate(&rows))
        .with_context(|| format!("cannot write {}", summary.display()))?;

    let metrics = RunMetrics {
        scenario: cfg.scenario,
        regime: cfg.regime,
        iterations: cfg.iterations,
        summary_file: SUMMARY_FILE.to_string(),
        replicates: outputs.into_iter().map(|o| o.metrics).collect(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let path = out.join(METRICS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&metrics)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(metrics)
}

fn run_replicate(cfg: &ExperimentConfig, scenario: &Scenario, seed: u64, out: &Path) -> Result<ReplicateOutput> {
    let start = Instant::now();
    let trace_file = trace_file_name(seed);
    let trace_path = out.join(&trace_file);
    let (rows, mut metrics) = match scenario {
        Scenario::Illustrative(ill) => {
            let eta = cfg.regime_eta();
            let regime = match cfg.regime.expect("validated") {
                RegimeKind::Oscillating => Regime::Oscillating(SequenceGenerator::Cycle(cfg.regime_sequence())),
                RegimeKind::Inexact => Regime::Inexact,
                RegimeKind::Exact => Regime::Exact,
            };
            let trace = ill.run_regime(&regime, eta, cfg.iterations, ill.config().y0)?;
            let lines: Vec<RegimeLine> = trace.records.iter().map(|r| RegimeLine::new(r, eta)).collect();
            write_jsonl(&trace_path, &lines).with_context(|| format!("cannot write {}", trace_path.display()))?;
            let stationarity = if cfg.stationarity_stride == 0 || trace.records.is_empty() {
                None
            } else {
                let selection = |y: &DVector<f64>| ill.selection(y[0]);
                let (mut num, mut den) = (0.0, 0.0);
                for r in trace.records.iter().step_by(cfg.stationarity_stride) {
                    let g = induced_gradient_fd(
                        ill.objective(),
                        &selection,
                        &DVector::from_element(1, r.y),
                        FdStep::default(),
                    )?;
                    num += g.norm_squared();
                    den += 1.0;
                }
                Some(num / den)
            };
            let rows = SummaryRow::from_regime(&lines);
            let metrics = ReplicateMetrics {
                seed,
                trace_file,
                records: lines.len(),
                final_j0: lines.last().map(|l| l.j0),
                best_j0: rows.last().map(|r| r.best_j0),
                final_y: vec![trace.final_y],
                stationarity,
                inner_iterations: 0,
                wall_clock_s: 0.0,
                fault: trace.fault,
            };
            (rows, metrics)
        }
        Scenario::Seek { problem, selection } => {
            let params = cfg.schedule.expect("validated").params(problem.leader_dim())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trace = seek(problem, &params, cfg.iterations, &mut rng, &cfg.seek_options())?;
            let lines: Vec<SeekLine> = trace.records.iter().map(SeekLine::from).collect();
            write_jsonl(&trace_path, &lines).with_context(|| format!("cannot write {}", trace_path.display()))?;
            let stationarity = seek_stationarity(cfg, problem, selection.as_deref(), &trace)?;
            let rows = SummaryRow::from_seek(&lines);
            let metrics = ReplicateMetrics {
                seed,
                trace_file,
                records: lines.len(),
                final_j0: lines.last().map(|l| l.j0),
                best_j0: rows.last().map(|r| r.best_j0),
                final_y: trace.final_y.iter().copied().collect(),
                stationarity,
                inner_iterations: trace
                    .records
                    .iter()
                    .map(|r| r.inner.iterations + r.inner_hat.iterations)
                    .sum(),
                wall_clock_s: 0.0,
                fault: trace.fault.as_ref().map(ToString::to_string),
            };
            (rows, metrics)
        }
    };
    metrics.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(ReplicateOutput { metrics, rows })
}

fn seek_stationarity(
    cfg: &ExperimentConfig,
    problem: &SeekProblem,
    selection: Option<&SelectionFn>,
    trace: &Trace,
) -> Result<Option<f64>> {
    if cfg.stationarity_stride == 0 || trace.is_empty() {
        return Ok(None);
    }
    let sub = Trace {
        records: trace.records.iter().step_by(cfg.stationarity_stride).cloned().collect(),
        final_y: trace.final_y.clone(),
        fault: None,
    };
    let value = match selection {
        Some(oracle) => stationarity_profile(&sub, problem.objective(), oracle, FdStep::default())?,
        None => {
            let path = TikhonovPathParams {
                inner: cfg
                    .inner
                    .params()
                    .with_max_iterations(cfg.inner.max_iterations.max(2_000_000)),
                ..Default::default()
            };
            let oracle =
                |y: &DVector<f64>| optimal_selection(problem.game(), problem.phi(), y, &path).map(|p| p.solution);
            stationarity_profile(&sub, problem.objective(), &oracle, FdStep::default())?
        }
    };
    Ok(Some(value))
}
