//! Follower games, selection functions and leader objectives.
//!
//! Everything here is an oracle-backed record: the library never inspects the
//! closed form of a cost, it only evaluates the pseudogradient `F(x; y)`, the
//! selection gradient `∇φ(x)` and the leader value `J0(y, x)`. Records are
//! immutable after construction and their oracles must be pure, so a game can
//! be shared across threads behind an `Arc`.

mod audit;
mod region;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DVector, DVectorView};

use crate::error::{check_dim, check_finite, Error, Result};

pub use audit::{
    check_gradient_fd, check_monotonicity, check_pseudogradient_fd, check_strong_convexity, check_strong_monotonicity,
    ConvexityReport, FdReport, MonotonicityReport, MONOTONICITY_THRESHOLD,
};
pub use region::{AffineRow, FeasibleRegion, RegionBuilder, RowKind};

pub type Vector = DVector<f64>;

/// Leader strategy `y ∈ ℝ^m`.
pub type LeaderDecision = Vector;

/// Stacked follower strategies `x = col(x_1, …, x_N) ∈ ℝ^n`.
pub type FollowerProfile = Vector;

/// `(x, y) ↦ F(x; y)`.
pub type PseudogradientFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// `(i, x, y) ↦ J_i(x_i, x_{-i}; y)`.
pub type PlayerCostFn = Arc<dyn Fn(usize, &Vector, &Vector) -> f64 + Send + Sync>;

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type LeaderValueFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// Declared monotonicity of `F(·; y)`.
///
/// The declaration drives solver selection; [`check_monotonicity`] is the
/// sampling guardrail that spot-checks it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MonotonicityClass {
    StronglyMonotone(f64),
    Monotone,
    Unverified,
}

impl MonotonicityClass {
    pub fn is_monotone(&self) -> bool {
        !matches!(self, MonotonicityClass::Unverified)
    }
}

impl fmt::Display for MonotonicityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonotonicityClass::StronglyMonotone(s) => write!(f, "strongly-monotone({s})"),
            MonotonicityClass::Monotone => f.write_str("monotone"),
            MonotonicityClass::Unverified => f.write_str("unverified"),
        }
    }
}

/// Partition of `x` into the follower blocks `x_1, …, x_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("a game needs at least one follower"));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid("follower blocks must be non-empty"));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { offsets })
    }

    /// One scalar decision per follower.
    pub fn scalar(players: usize) -> Result<Self> {
        Self::new(&vec![1; players])
    }

    pub fn players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player + 1]
    }

    pub fn block<'a>(&self, x: &'a Vector, player: usize) -> DVectorView<'a, f64> {
        let r = self.range(player);
        x.rows(r.start, r.len())
    }
}

/// The follower game `{min_{x_i ∈ X_i(x_{-i})} J_i(x_i, x_{-i}; y)}_i`.
#[derive(Clone)]
pub struct ParametricGame {
    layout: BlockLayout,
    leader_dim: usize,
    pseudogradient: PseudogradientFn,
    player_costs: Option<PlayerCostFn>,
    region: FeasibleRegion,
    class: MonotonicityClass,
}

impl fmt::Debug for ParametricGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricGame")
            .field("layout", &self.layout)
            .field("leader_dim", &self.leader_dim)
            .field("class", &self.class)
            .field("region", &self.region)
            .finish_non_exhaustive()
    }
}

impl ParametricGame {
    pub fn new(
        layout: BlockLayout,
        leader_dim: usize,
        region: FeasibleRegion,
        pseudogradient: PseudogradientFn,
    ) -> Result<Self> {
        check_dim("feasible region", layout.dim(), region.dim())?;
        if leader_dim == 0 {
            return Err(Error::invalid("leader dimension must be at least 1"));
        }
        Ok(Self {
            layout,
            leader_dim,
            pseudogradient,
            player_costs: None,
            region,
            class: MonotonicityClass::Unverified,
        })
    }

    pub fn with_class(mut self, class: MonotonicityClass) -> Result<Self> {
        if let MonotonicityClass::StronglyMonotone(s) = class {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("strong monotonicity modulus must be positive"));
            }
        }
        self.class = class;
        Ok(self)
    }

    pub fn with_player_costs(mut self, costs: PlayerCostFn) -> Self {
        self.player_costs = Some(costs);
        self
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn players(&self) -> usize {
        self.layout.players()
    }

    pub fn leader_dim(&self) -> usize {
        self.leader_dim
    }

    pub fn region(&self) -> &FeasibleRegion {
        &self.region
    }

    pub fn class(&self) -> MonotonicityClass {
        self.class
    }

    pub fn has_player_costs(&self) -> bool {
        self.player_costs.is_some()
    }

    /// `F(x; y) = col(∇_{x_i} J_i(x_i, x_{-i}; y))`.
    pub fn eval_pseudogradient(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        check_dim("follower profile", self.dim(), x.len())?;
        check_dim("leader decision", self.leader_dim, y.len())?;
        let f = (self.pseudogradient)(x, y);
        check_dim("pseudogradient output", self.dim(), f.len())?;
        check_finite("pseudogradient", &f)?;
        Ok(f)
    }

    /// The raw oracle, without dimension or finiteness checks.
    pub fn pseudogradient(&self) -> &PseudogradientFn {
        &self.pseudogradient
    }

    /// `J_i(x; y)` when value oracles were supplied.
    pub fn player_cost(&self, player: usize, x: &Vector, y: &Vector) -> Option<f64> {
        self.player_costs.as_ref().map(|c| c(player, x, y))
    }

    /// `Σ_i J_i(x; y)` when value oracles were supplied.
    pub fn total_cost(&self, x: &Vector, y: &Vector) -> Option<f64> {
        let costs = self.player_costs.as_ref()?;
        Some((0..self.players()).map(|i| costs(i, x, y)).sum())
    }
}

/// Strongly convex selection criterion `φ` with modulus `μ`.
#[derive(Clone)]
pub struct SelectionFunction {
    dim: usize,
    modulus: f64,
    value: ScalarFn,
    gradient: VectorFn,
}

impl fmt::Debug for SelectionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelectionFunction")
            .field("dim", &self.dim)
            .field("modulus", &self.modulus)
            .finish_non_exhaustive()
    }
}

impl SelectionFunction {
    pub fn new(dim: usize, modulus: f64, value: ScalarFn, gradient: VectorFn) -> Result<Self> {
        if !(modulus > 0.0 && modulus.is_finite()) {
            return Err(Error::invalid("selection modulus mu must be positive"));
        }
        Ok(Self {
            dim,
            modulus,
            value,
            gradient,
        })
    }

    /// `φ(x) = ½‖x‖²`, μ = 1.
    pub fn half_squared_norm(dim: usize) -> Self {
        Self {
            dim,
            modulus: 1.0,
            value: Arc::new(|x: &Vector| 0.5 * x.norm_squared()),
            gradient: Arc::new(|x: &Vector| x.clone()),
        }
    }

    /// `φ(x) = Σ_t w_t (x_t − a_t)²`, μ = 2·min_t w_t.
    pub fn weighted_anchor(weights: Vector, anchor: Vector) -> Result<Self> {
        check_dim("selection anchor", weights.len(), anchor.len())?;
        let min_w = weights.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_w > 0.0) {
            return Err(Error::invalid("selection weights must be positive"));
        }
        let dim = weights.len();
        let (w1, a1) = (weights.clone(), anchor.clone());
        let value: ScalarFn = Arc::new(move |x: &Vector| {
            x.iter()
                .zip(w1.iter().zip(a1.iter()))
                .map(|(xi, (wi, ai))| wi * (xi - ai) * (xi - ai))
                .sum()
        });
        let gradient: VectorFn = Arc::new(move |x: &Vector| {
            let d = x - &anchor;
            d.component_mul(&weights) * 2.0
        });
        Self::new(dim, 2.0 * min_w, value, gradient)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("selection input", self.dim, x.len())?;
        let v = (self.value)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what: "selection value",
            })
        }
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("selection input", self.dim, x.len())?;
        let g = (self.gradient)(x);
        check_dim("selection gradient", self.dim, g.len())?;
        check_finite("selection gradient", &g)?;
        Ok(g)
    }

    pub(crate) fn gradient_fn(&self) -> &VectorFn {
        &self.gradient
    }
}

/// Optional analytic constants attached to a leader objective.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeaderMetadata {
    /// Lipschitz constant of `J0(·, x)`.
    pub l1: Option<f64>,
    /// Lipschitz constant of `J0(y, ·)`.
    pub l2: Option<f64>,
    /// Lipschitz constant of the induced objective `y ↦ J0(y, x*φ(y))`.
    pub induced_lipschitz: Option<f64>,
    /// Smoothness constant of the induced objective.
    pub induced_smoothness: Option<f64>,
    /// Lower bound `J0*` of the induced objective.
    pub lower_bound: Option<f64>,
    /// Weight and reference point of a `λ‖y − ȳ‖²` penalty term.
    pub penalty: Option<(f64, Vec<f64>)>,
}

/// Leader cost `J0(y, x)`.
#[derive(Clone)]
pub struct LeaderObjective {
    leader_dim: usize,
    follower_dim: usize,
    value: LeaderValueFn,
    meta: LeaderMetadata,
}

impl fmt::Debug for LeaderObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeaderObjective")
            .field("leader_dim", &self.leader_dim)
            .field("follower_dim", &self.follower_dim)
            .field("meta", &self.meta)
            .finish_non_exhaustive()
    }
}

impl LeaderObjective {
    pub fn new(leader_dim: usize, follower_dim: usize, value: LeaderValueFn) -> Self {
        Self {
            leader_dim,
            follower_dim,
            value,
            meta: LeaderMetadata::default(),
        }
    }

    pub fn with_metadata(mut self, meta: LeaderMetadata) -> Self {
        self.meta = meta;
        self
    }

    pub fn leader_dim(&self) -> usize {
        self.leader_dim
    }

    pub fn follower_dim(&self) -> usize {
        self.follower_dim
    }

    pub fn metadata(&self) -> &LeaderMetadata {
        &self.meta
    }

    pub fn eval(&self, y: &Vector, x: &Vector) -> Result<f64> {
        check_dim("leader decision", self.leader_dim, y.len())?;
        check_dim("follower profile", self.follower_dim, x.len())?;
        let v = (self.value)(y, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what: "leader objective",
            })
        }
    }
}
