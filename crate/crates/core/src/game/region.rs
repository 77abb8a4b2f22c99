use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::vi::PolyhedralProjector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    LessEq,
    Equal,
}

/// One sparse affine constraint `aᵀx ≤ b` or `aᵀx = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineRow {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: RowKind,
}

impl AffineRow {
    pub fn dot(&self, x: &DVector<f64>) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.coeffs.iter().map(|&(_, a)| a * a).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let r = self.dot(x) - self.rhs;
        match self.kind {
            RowKind::LessEq => r.max(0.0),
            RowKind::Equal => r.abs(),
        }
    }
}

/// Per-coordinate boxes `lo ≤ x ≤ hi` intersected with sparse affine rows.
///
/// Construction runs a feasibility solve, so every `FeasibleRegion` in
/// existence holds a witness point.
#[derive(Clone)]
pub struct FeasibleRegion {
    lo: DVector<f64>,
    hi: DVector<f64>,
    rows: Vec<AffineRow>,
    witness: DVector<f64>,
}

impl fmt::Debug for FeasibleRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeasibleRegion")
            .field("dim", &self.dim())
            .field("rows", &self.rows.len())
            .finish()
    }
}

impl FeasibleRegion {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn rows(&self) -> &[AffineRow] {
        &self.rows
    }

    pub fn is_box(&self) -> bool {
        self.rows.is_empty()
    }

    /// The point found by the construction-time feasibility solve.
    pub fn feasible_point(&self) -> &DVector<f64> {
        &self.witness
    }

    /// Largest constraint violation at `x`, boxes included, and the label of
    /// the worst row (`None` when the worst offender is a box bound).
    pub fn max_violation(&self, x: &DVector<f64>) -> (f64, Option<&str>) {
        let mut worst = 0.0;
        let mut label = None;
        for i in 0..x.len() {
            let v = (self.lo[i] - x[i]).max(x[i] - self.hi[i]).max(0.0);
            if v > worst {
                worst = v;
                label = None;
            }
        }
        for row in &self.rows {
            let v = row.violation(x);
            if v > worst {
                worst = v;
                label = Some(row.label.as_str());
            }
        }
        (worst, label)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && self.max_violation(x).0 <= tol
    }

    /// The affine part as `A x ≤ b` with every equality written as the pair
    /// `aᵀx ≤ b`, `−aᵀx ≤ −b`.
    pub fn inequality_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p: usize = self
            .rows
            .iter()
            .map(|r| match r.kind {
                RowKind::LessEq => 1,
                RowKind::Equal => 2,
            })
            .sum();
        let mut a = DMatrix::zeros(p, self.dim());
        let mut b = DVector::zeros(p);
        let mut k = 0;
        for row in &self.rows {
            for &(i, c) in &row.coeffs {
                a[(k, i)] += c;
            }
            b[k] = row.rhs;
            k += 1;
            if row.kind == RowKind::Equal {
                for &(i, c) in &row.coeffs {
                    a[(k, i)] -= c;
                }
                b[k] = -row.rhs;
                k += 1;
            }
        }
        (a, b)
    }
}

#[derive(Clone, Debug)]
pub struct RegionBuilder {
    lo: DVector<f64>,
    hi: DVector<f64>,
    rows: Vec<AffineRow>,
}

impl RegionBuilder {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Self {
        Self {
            lo,
            hi,
            rows: Vec::new(),
        }
    }

    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn less_eq(mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        self.rows.push(AffineRow {
            label: label.into(),
            coeffs,
            rhs,
            kind: RowKind::LessEq,
        });
        self
    }

    pub fn equal(mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        self.rows.push(AffineRow {
            label: label.into(),
            coeffs,
            rhs,
            kind: RowKind::Equal,
        });
        self
    }

    pub fn push(&mut self, row: AffineRow) {
        self.rows.push(row);
    }

    pub fn build(self) -> Result<FeasibleRegion> {
        check_dim("box upper bound", self.lo.len(), self.hi.len())?;
        let n = self.lo.len();
        if n == 0 {
            return Err(Error::invalid("feasible region must have positive dimension"));
        }
        for i in 0..n {
            let (l, h) = (self.lo[i], self.hi[i]);
            if l.is_nan() || h.is_nan() || l > h || l == f64::INFINITY || h == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("box bound {i} has lo = {l} > hi = {h}")));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::invalid(format!("row `{}` has non-finite rhs", row.label)));
            }
            for &(i, c) in &row.coeffs {
                if i >= n {
                    return Err(Error::invalid(format!(
                        "row `{}` references coordinate {i} of a {n}-dimensional region",
                        row.label
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::invalid(format!(
                        "row `{}` has a non-finite coefficient",
                        row.label
                    )));
                }
            }
            if row.norm_squared() == 0.0 {
                let trivially_ok = match row.kind {
                    RowKind::LessEq => row.rhs >= 0.0,
                    RowKind::Equal => row.rhs == 0.0,
                };
                if !trivially_ok {
                    return Err(Error::Infeasible {
                        row: row.label.clone(),
                        violation: row.rhs.abs(),
                    });
                }
            }
        }

        // Anchor the feasibility solve at the box centre (or the finite bound).
        let start = DVector::from_fn(n, |i, _| {
            let (l, h) = (self.lo[i], self.hi[i]);
            match (l.is_finite(), h.is_finite()) {
                (true, true) => 0.5 * (l + h),
                (true, false) => l,
                (false, true) => h,
                (false, false) => 0.0,
            }
        });
        let mut region = FeasibleRegion {
            lo: self.lo,
            hi: self.hi,
            rows: self.rows,
            witness: start.clone(),
        };
        if region.rows.is_empty() {
            return Ok(region);
        }
        let mut projector = PolyhedralProjector::new(&region).with_max_sweeps(200_000);
        let outcome = projector.project_detailed(&start, 1e-10);
        let (violation, worst) = region.max_violation(&outcome.point);
        if !outcome.converged && violation > 1e-8 {
            return Err(Error::Infeasible {
                row: worst.unwrap_or("box bounds").to_string(),
                violation,
            });
        }
        region.witness = outcome.point;
        Ok(region)
    }
}
