//! Desk-scale energy community with peer-to-peer trading.
//!
//! Each agent `i` decides, for every hour `h`, its local generation `p^g`,
//! grid purchase `p^mg`, storage draw `p^st`, trades `p^tr_(i,j)` with each
//! partner and its bus phase `θ`. The leader sets one trading price per hour.
//!
//! Agent cost per hour:
//! `c^g_i p^g + (d_h S_h + c_h) p^mg_i + ω_i y_h Σ_j p^tr_ij + κ/2 Σ_j (p^tr_ij)²`
//! where `S_h` is the community's aggregate grid draw.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    BlockLayout, LeaderMetadata, LeaderObjective, MonotonicityClass, ParametricGame, RegionBuilder, SelectionFunction,
};
use crate::zo::SeekProblem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub nodes: usize,
    pub horizon: usize,
    /// `demand[i][h]`.
    pub demand: Vec<Vec<f64>>,
    /// `gen_max[i][h]`, the renewable availability of agent `i`.
    pub gen_max: Vec<Vec<f64>>,
    /// Linear generation cost per agent.
    pub gen_cost: Vec<f64>,
    /// Symmetric per-hour storage limit per agent.
    pub storage_limit: Vec<f64>,
    pub grid_max: f64,
    /// Hourly slope `d_h` of the grid price in the aggregate draw.
    pub grid_slope: Vec<f64>,
    /// Hourly base grid price `c_h`.
    pub grid_base: Vec<f64>,
    pub trade_limit: f64,
    /// Quadratic trading friction `κ`.
    pub trade_friction: f64,
    /// Per-agent tariff weights `ω_i` applied to the leader's price.
    pub tariff_weights: Vec<f64>,
    /// Undirected trading pairs; empty means every pair of agents trades.
    pub partners: Vec<[usize; 2]>,
    pub lines: Vec<LineConfig>,
    pub theta_max: f64,
    pub theta_ref: f64,
    /// Bus whose phase is pinned to `theta_ref` (the grid connection).
    pub root: usize,
    /// Leader penalty weight `λ`.
    pub penalty: f64,
    /// Reference price `ȳ` per hour.
    pub reference_price: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        let line = |from, to| LineConfig {
            from,
            to,
            susceptance: 5.0,
            limit: 1.0,
        };
        Self {
            nodes: 3,
            horizon: 2,
            demand: vec![vec![1.0, 1.2], vec![0.8, 1.0], vec![1.2, 0.9]],
            gen_max: vec![vec![0.3, 0.2], vec![1.2, 0.8], vec![0.2, 0.6]],
            gen_cost: vec![0.0, 0.0, 0.1],
            storage_limit: vec![0.3, 0.3, 0.3],
            grid_max: 2.0,
            grid_slope: vec![0.2, 0.3],
            grid_base: vec![0.5, 0.8],
            trade_limit: 1.0,
            trade_friction: 0.5,
            tariff_weights: vec![1.0, 0.6, 0.8],
            partners: Vec::new(),
            lines: vec![line(0, 1), line(1, 2), line(0, 2)],
            theta_max: 0.5,
            theta_ref: 0.0,
            root: 0,
            penalty: 1.0,
            reference_price: vec![0.5, 0.5],
            y0: vec![2.0, 2.0],
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has {got} entries, expected {want}")))
    }
}

fn nonneg(what: &str, vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| *v >= 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite and nonnegative")))
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.nodes, self.horizon);
        if n < 2 {
            return Err(Error::invalid("energy community needs at least 2 nodes"));
        }
        if h == 0 {
            return Err(Error::invalid("horizon must be at least 1 hour"));
        }
        check_len("demand", self.demand.len(), n)?;
        check_len("gen_max", self.gen_max.len(), n)?;
        for i in 0..n {
            check_len("demand row", self.demand[i].len(), h)?;
            check_len("gen_max row", self.gen_max[i].len(), h)?;
            nonneg("demand", &self.demand[i])?;
            nonneg("gen_max", &self.gen_max[i])?;
        }
        check_len("gen_cost", self.gen_cost.len(), n)?;
        check_len("storage_limit", self.storage_limit.len(), n)?;
        check_len("tariff_weights", self.tariff_weights.len(), n)?;
        check_len("grid_slope", self.grid_slope.len(), h)?;
        check_len("grid_base", self.grid_base.len(), h)?;
        check_len("reference_price", self.reference_price.len(), h)?;
        check_len("y0", self.y0.len(), h)?;
        nonneg("gen_cost", &self.gen_cost)?;
        nonneg("storage_limit", &self.storage_limit)?;
        nonneg("grid_slope", &self.grid_slope)?;
        nonneg("grid_base", &self.grid_base)?;
        nonneg(
            "scalar limits",
            &[
                self.grid_max,
                self.trade_limit,
                self.trade_friction,
                self.theta_max,
                self.penalty,
            ],
        )?;
        if self
            .tariff_weights
            .iter()
            .chain(&self.reference_price)
            .chain(&self.y0)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("prices and tariff weights must be finite"));
        }
        if !self.theta_ref.is_finite() || self.theta_ref.abs() > self.theta_max {
            return Err(Error::invalid("theta_ref must lie within [-theta_max, theta_max]"));
        }
        if self.root >= n {
            return Err(Error::invalid(format!("root bus {} out of range", self.root)));
        }
        let mut seen = BTreeSet::new();
        for l in &self.lines {
            if l.from >= n || l.to >= n || l.from == l.to {
                return Err(Error::invalid(format!(
                    "line ({}, {}) is not a valid bus pair",
                    l.from, l.to
                )));
            }
            if !seen.insert((l.from.min(l.to), l.from.max(l.to))) {
                return Err(Error::invalid(format!("duplicate line ({}, {})", l.from, l.to)));
            }
            if !(l.susceptance > 0.0 && l.limit >= 0.0) || !l.limit.is_finite() {
                return Err(Error::invalid("lines need positive susceptance and a finite limit"));
            }
        }
        if !self.is_connected() {
            return Err(Error::invalid("line graph must connect every bus"));
        }
        let mut pairs = BTreeSet::new();
        for &[a, b] in &self.partners {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(format!("trading pair ({a}, {b}) is not valid")));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid(format!("duplicate trading pair ({a}, {b})")));
            }
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let mut reached = vec![false; self.nodes];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(b) = stack.pop() {
            for l in &self.lines {
                let other = if l.from == b {
                    l.to
                } else if l.to == b {
                    l.from
                } else {
                    continue;
                };
                if !reached[other] {
                    reached[other] = true;
                    stack.push(other);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }

    /// Sorted partner list of every agent.
    pub fn partner_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.nodes];
        if self.partners.is_empty() {
            for (i, list) in lists.iter_mut().enumerate() {
                list.extend((0..self.nodes).filter(|&j| j != i));
            }
        } else {
            for &[a, b] in &self.partners {
                lists[a].push(b);
                lists[b].push(a);
            }
            for l in &mut lists {
                l.sort_unstable();
            }
        }
        lists
    }
}

/// Position of every decision variable in the stacked profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnergyIndex {
    horizon: usize,
    partners: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl EnergyIndex {
    fn new(horizon: usize, partners: Vec<Vec<usize>>) -> Self {
        let mut offsets = vec![0];
        for p in &partners {
            offsets.push(offsets.last().unwrap() + horizon * (4 + p.len()));
        }
        Self {
            horizon,
            partners,
            offsets,
        }
    }

    fn hour_base(&self, i: usize, h: usize) -> usize {
        self.offsets[i] + h * (4 + self.partners[i].len())
    }

    pub fn agents(&self) -> usize {
        self.partners.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn partners(&self, i: usize) -> &[usize] {
        &self.partners[i]
    }

    pub fn gen(&self, i: usize, h: usize) -> usize {
        self.hour_base(i, h)
    }

    pub fn grid(&self, i: usize, h: usize) -> usize {
        self.hour_base(i, h) + 1
    }

    pub fn storage(&self, i: usize, h: usize) -> usize {
        self.hour_base(i, h) + 2
    }

    /// Index of `p^tr_(i,j),h`; `None` if `j` is not a partner of `i`.
    pub fn trade(&self, i: usize, j: usize, h: usize) -> Option<usize> {
        let k = self.partners[i].iter().position(|&p| p == j)?;
        Some(self.hour_base(i, h) + 3 + k)
    }

    pub fn theta(&self, i: usize, h: usize) -> usize {
        self.hour_base(i, h) + 3 + self.partners[i].len()
    }
}

#[derive(Clone, Debug)]
pub struct EnergyCommunity {
    config: EnergyConfig,
    index: EnergyIndex,
    problem: SeekProblem,
}

pub fn build_energy_community(config: EnergyConfig) -> Result<EnergyCommunity> {
    config.validate()?;
    let (n_agents, hours) = (config.nodes, config.horizon);
    let index = EnergyIndex::new(hours, config.partner_lists());
    let dim = index.dim();

    let mut lo = DVector::zeros(dim);
    let mut hi = DVector::zeros(dim);
    let mut anchor = DVector::zeros(dim);
    for i in 0..n_agents {
        for h in 0..hours {
            hi[index.gen(i, h)] = config.gen_max[i][h];
            anchor[index.gen(i, h)] = config.gen_max[i][h];
            hi[index.grid(i, h)] = config.grid_max;
            lo[index.storage(i, h)] = -config.storage_limit[i];
            hi[index.storage(i, h)] = config.storage_limit[i];
            for &j in index.partners(i) {
                let t = index.trade(i, j, h).unwrap();
                lo[t] = -config.trade_limit;
                hi[t] = config.trade_limit;
            }
            let th = index.theta(i, h);
            anchor[th] = config.theta_ref;
            if i == config.root {
                lo[th] = config.theta_ref;
                hi[th] = config.theta_ref;
            } else {
                lo[th] = -config.theta_max;
                hi[th] = config.theta_max;
            }
        }
    }

    let mut rb = RegionBuilder::new(lo, hi);
    for h in 0..hours {
        for i in 0..n_agents {
            let d = config.demand[i][h];
            let mut bal = vec![
                (index.gen(i, h), 1.0),
                (index.grid(i, h), 1.0),
                (index.storage(i, h), 1.0),
            ];
            bal.extend(index.partners(i).iter().map(|&j| (index.trade(i, j, h).unwrap(), 1.0)));
            rb = rb.equal(format!("balance[agent {i}, hour {h}]"), bal, d);

            let mut flow = vec![
                (index.gen(i, h), 1.0),
                (index.grid(i, h), 1.0),
                (index.storage(i, h), 1.0),
            ];
            let mut own = 0.0;
            for l in config.lines.iter().filter(|l| l.from == i || l.to == i) {
                let other = if l.from == i { l.to } else { l.from };
                own -= l.susceptance;
                flow.push((index.theta(other, h), l.susceptance));
            }
            flow.push((index.theta(i, h), own));
            rb = rb.equal(format!("power-flow[bus {i}, hour {h}]"), flow, d);
        }
        for i in 0..n_agents {
            for &j in index.partners(i).iter().filter(|&&j| j > i) {
                let (a, b) = (index.trade(i, j, h).unwrap(), index.trade(j, i, h).unwrap());
                rb = rb.equal(format!("reciprocity[{i}-{j}, hour {h}]"), vec![(a, 1.0), (b, 1.0)], 0.0);
            }
        }
        for l in &config.lines {
            let (a, b) = (index.theta(l.from, h), index.theta(l.to, h));
            let s = l.susceptance;
            rb = rb
                .less_eq(
                    format!("line-limit[{}->{}, hour {h}]", l.from, l.to),
                    vec![(a, s), (b, -s)],
                    l.limit,
                )
                .less_eq(
                    format!("line-limit[{}->{}, hour {h}]", l.to, l.from),
                    vec![(a, -s), (b, s)],
                    l.limit,
                );
        }
    }
    let region = rb.build()?;

    let pg_index = Arc::new(index.clone());
    let cfg = Arc::new(config.clone());
    let (ix, c) = (pg_index.clone(), cfg.clone());
    let pseudogradient = Arc::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let mut f = DVector::zeros(x.len());
        for h in 0..c.horizon {
            let s: f64 = (0..c.nodes).map(|i| x[ix.grid(i, h)]).sum();
            for i in 0..c.nodes {
                f[ix.gen(i, h)] = c.gen_cost[i];
                let g = ix.grid(i, h);
                f[g] = c.grid_slope[h] * (s + x[g]) + c.grid_base[h];
                for &j in ix.partners(i) {
                    let t = ix.trade(i, j, h).unwrap();
                    f[t] = c.tariff_weights[i] * y[h] + c.trade_friction * x[t];
                }
            }
        }
        f
    });
    let (ix, c) = (pg_index.clone(), cfg.clone());
    let player_cost = Arc::new(move |i: usize, x: &DVector<f64>, y: &DVector<f64>| agent_cost(&c, &ix, i, x, y));

    let game = ParametricGame::new(BlockLayout::new(&index.block_sizes())?, hours, region, pseudogradient)?
        .with_class(MonotonicityClass::Monotone)?
        .with_player_costs(player_cost);

    let phi = SelectionFunction::weighted_anchor(DVector::from_element(dim, 1.0), anchor)?;

    let (ix, c) = (pg_index, cfg);
    let objective = LeaderObjective::new(
        hours,
        dim,
        Arc::new(move |y: &DVector<f64>, x: &DVector<f64>| {
            let agents: f64 = (0..c.nodes).map(|i| agent_cost(&c, &ix, i, x, y)).sum();
            let pen: f64 = y.iter().zip(&c.reference_price).map(|(a, b)| (a - b) * (a - b)).sum();
            agents + c.penalty * pen
        }),
    )
    .with_metadata(LeaderMetadata {
        penalty: Some((config.penalty, config.reference_price.clone())),
        ..Default::default()
    });

    let problem = SeekProblem::new(game, phi, objective, DVector::from_vec(config.y0.clone()))?;
    Ok(EnergyCommunity { config, index, problem })
}

fn agent_cost(c: &EnergyConfig, ix: &EnergyIndex, i: usize, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for h in 0..c.horizon {
        let s: f64 = (0..c.nodes).map(|j| x[ix.grid(j, h)]).sum();
        total += c.gen_cost[i] * x[ix.gen(i, h)];
        total += (c.grid_slope[h] * s + c.grid_base[h]) * x[ix.grid(i, h)];
        for &j in ix.partners(i) {
            let t = x[ix.trade(i, j, h).unwrap()];
            total += c.tariff_weights[i] * y[h] * t + 0.5 * c.trade_friction * t * t;
        }
    }
    total
}

impl EnergyCommunity {
    pub fn config(&self) -> &EnergyConfig {
        &self.config
    }

    pub fn index(&self) -> &EnergyIndex {
        &self.index
    }

    pub fn problem(&self) -> &SeekProblem {
        &self.problem
    }

    pub fn into_problem(self) -> SeekProblem {
        self.problem
    }

    /// The profile at which every selection term vanishes: full renewable
    /// output, no grid draw, storage or trades, every phase at the reference.
    pub fn selection_anchor(&self) -> DVector<f64> {
        let ix = &self.index;
        let mut x = DVector::zeros(ix.dim());
        for i in 0..self.config.nodes {
            for h in 0..self.config.horizon {
                x[ix.gen(i, h)] = self.config.gen_max[i][h];
                x[ix.theta(i, h)] = self.config.theta_ref;
            }
        }
        x
    }

    /// `Σ_i (p^g + p^mg + p^st) − Σ_i d` for every hour.
    pub fn supply_surplus(&self, x: &DVector<f64>) -> Vec<f64> {
        let ix = &self.index;
        (0..self.config.horizon)
            .map(|h| {
                (0..self.config.nodes)
                    .map(|i| x[ix.gen(i, h)] + x[ix.grid(i, h)] + x[ix.storage(i, h)] - self.config.demand[i][h])
                    .sum()
            })
            .collect()
    }

    /// Largest `|p^tr_(i,j),h + p^tr_(j,i),h|` over all pairs and hours.
    pub fn reciprocity_gap(&self, x: &DVector<f64>) -> f64 {
        let ix = &self.index;
        let mut worst: f64 = 0.0;
        for h in 0..self.config.horizon {
            for i in 0..self.config.nodes {
                for &j in ix.partners(i) {
                    let a = x[ix.trade(i, j, h).unwrap()];
                    let b = x[ix.trade(j, i, h).unwrap()];
                    worst = worst.max((a + b).abs());
                }
            }
        }
        worst
    }
}
