//! Euclidean projection onto box-plus-affine regions.
//!
//! The projection `argmin_{w ∈ Ω} ½‖w − z‖²` is computed on the dual: with
//! multipliers `λ` on the affine rows the primal minimiser is
//! `x(λ) = clamp(z − Aᵀλ, lo, hi)`, and the dual is maximised one row at a time
//! (Hildreth-style coordinate ascent). Each coordinate step is exact: the dual
//! derivative along a row is piecewise linear and nonincreasing, so its root is
//! located by walking the clamp breakpoints.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::{AffineRow, FeasibleRegion, RowKind};

/// Componentwise clamp, i.e. the Euclidean projection onto `[lo, hi]`.
pub fn project_box(z: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(z.len(), |i, _| z[i].clamp(lo[i], hi[i]))
}

/// Cold-start projection onto `region` with accuracy `tol`.
pub fn project_polyhedron(z: &DVector<f64>, region: &FeasibleRegion, tol: f64) -> Result<DVector<f64>> {
    PolyhedralProjector::new(region).project(z, tol)
}

#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub point: DVector<f64>,
    pub sweeps: usize,
    pub violation: f64,
    pub converged: bool,
}

/// Stateful projector that keeps the row multipliers between calls.
///
/// Consecutive projections inside an iterative solver land on nearby points,
/// so reusing the previous multipliers usually finishes in a sweep or two.
#[derive(Clone, Debug)]
pub struct PolyhedralProjector<'r> {
    region: &'r FeasibleRegion,
    duals: Vec<f64>,
    max_sweeps: usize,
}

impl<'r> PolyhedralProjector<'r> {
    pub fn new(region: &'r FeasibleRegion) -> Self {
        Self {
            region,
            duals: vec![0.0; region.rows().len()],
            max_sweeps: 20_000,
        }
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps.max(1);
        self
    }

    pub fn region(&self) -> &'r FeasibleRegion {
        self.region
    }

    pub fn project(&mut self, z: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let out = self.project_detailed(z, tol);
        if out.converged {
            Ok(out.point)
        } else {
            Err(Error::ProjectionNotConverged {
                sweeps: out.sweeps,
                violation: out.violation,
            })
        }
    }

    pub fn project_detailed(&mut self, z: &DVector<f64>, tol: f64) -> ProjectionOutcome {
        let region = self.region;
        let (lo, hi) = (region.lo(), region.hi());
        let rows = region.rows();
        if rows.is_empty() {
            return ProjectionOutcome {
                point: project_box(z, lo, hi),
                sweeps: 0,
                violation: 0.0,
                converged: true,
            };
        }

        let mut w = z.clone();
        let mut x_prev = DVector::zeros(z.len());
        let mut violation = f64::INFINITY;
        for sweep in 1..=self.max_sweeps {
            // Rebuild w = z − Aᵀλ from scratch to keep round-off from drifting.
            w.copy_from(z);
            for (row, &l) in rows.iter().zip(&self.duals) {
                if l != 0.0 {
                    for &(i, a) in &row.coeffs {
                        w[i] -= l * a;
                    }
                }
            }
            if sweep == 1 {
                x_prev = project_box(&w, lo, hi);
            }
            for (r, row) in rows.iter().enumerate() {
                let old = self.duals[r];
                if old != 0.0 {
                    for &(i, a) in &row.coeffs {
                        w[i] += old * a;
                    }
                }
                let t = solve_row(row, &w, lo, hi, old);
                self.duals[r] = t;
                if t != 0.0 {
                    for &(i, a) in &row.coeffs {
                        w[i] -= t * a;
                    }
                }
            }
            let x = project_box(&w, lo, hi);
            violation = rows.iter().map(|row| row.violation(&x)).fold(0.0, f64::max);
            let moved = (&x - &x_prev).amax();
            if violation <= tol && moved <= 0.1 * tol {
                return ProjectionOutcome {
                    point: x,
                    sweeps: sweep,
                    violation,
                    converged: true,
                };
            }
            x_prev = x;
        }
        ProjectionOutcome {
            point: x_prev,
            sweeps: self.max_sweeps,
            violation,
            converged: false,
        }
    }
}

/// `g(t) = aᵀ clamp(w − t a) − b`, the dual derivative along one row.
fn row_slack(row: &AffineRow, w: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, t: f64) -> f64 {
    row.coeffs
        .iter()
        .map(|&(i, a)| a * (w[i] - t * a).clamp(lo[i], hi[i]))
        .sum::<f64>()
        - row.rhs
}

/// Exact maximiser of the dual along one row's multiplier.
fn solve_row(row: &AffineRow, w: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, current: f64) -> f64 {
    let g = |t: f64| row_slack(row, w, lo, hi, t);
    match row.kind {
        RowKind::LessEq => {
            let g0 = g(0.0);
            if g0 <= 0.0 {
                0.0
            } else {
                find_root(row, w, lo, hi, 0.0, g0, 1.0).max(0.0)
            }
        }
        RowKind::Equal => {
            let gc = g(current);
            if gc == 0.0 {
                current
            } else if gc > 0.0 {
                find_root(row, w, lo, hi, current, gc, 1.0)
            } else {
                find_root(row, w, lo, hi, current, gc, -1.0)
            }
        }
    }
}

/// Walk the breakpoints of the piecewise-linear `g` from `start` in direction
/// `dir` until it crosses zero; the root is then found by linear interpolation.
/// If `g` never reaches zero the row cannot be satisfied under the current
/// clamps and the last breakpoint is returned.
fn find_root(
    row: &AffineRow,
    w: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    start: f64,
    g_start: f64,
    dir: f64,
) -> f64 {
    let g = |t: f64| row_slack(row, w, lo, hi, t);
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * row.coeffs.len());
    for &(i, a) in &row.coeffs {
        if a == 0.0 {
            continue;
        }
        for bound in [lo[i], hi[i]] {
            if bound.is_finite() {
                let t = (w[i] - bound) / a;
                if (t - start) * dir > 0.0 {
                    breaks.push(t);
                }
            }
        }
    }
    breaks.sort_by(|p, q| ((p - start) * dir).total_cmp(&((q - start) * dir)));

    let (mut ta, mut ga) = (start, g_start);
    for tb in breaks {
        let gb = g(tb);
        if gb * ga <= 0.0 {
            return if ga == gb { tb } else { ta + (tb - ta) * ga / (ga - gb) };
        }
        ta = tb;
        ga = gb;
    }
    // Beyond the last breakpoint g is affine; extrapolate if it still moves.
    let tb = ta + dir;
    let gb = g(tb);
    if ga * (ga - gb) > 0.0 {
        ta + (tb - ta) * ga / (ga - gb)
    } else {
        ta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::RegionBuilder;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn box_clamp() {
        let lo = v(&[-1.0, -1.0]);
        let hi = v(&[1.0, 1.0]);
        assert_eq!(project_box(&v(&[3.0, -3.0]), &lo, &hi), v(&[1.0, -1.0]));
        assert_eq!(project_box(&v(&[0.2, -0.7]), &lo, &hi), v(&[0.2, -0.7]));
        assert_eq!(
            project_box(&v(&[0.5, 2.0]), &v(&[0.0, 0.0]), &v(&[1.0, 1.0])),
            v(&[0.5, 1.0])
        );
    }

    #[test]
    fn halfspace_projection() {
        let region = RegionBuilder::uniform_box(2, -10.0, 10.0)
            .less_eq("sum", vec![(0, 1.0), (1, 1.0)], 2.0)
            .build()
            .unwrap();
        let p = project_polyhedron(&v(&[2.0, 2.0]), &region, 1e-12).unwrap();
        assert!((p - v(&[1.0, 1.0])).amax() < 1e-10);
    }

    #[test]
    fn line_projection() {
        let region = RegionBuilder::uniform_box(2, -10.0, 10.0)
            .equal("line", vec![(0, 1.0), (1, -1.0)], 1.0)
            .build()
            .unwrap();
        let p = project_polyhedron(&v(&[3.0, 0.0]), &region, 1e-12).unwrap();
        assert!((p - v(&[2.0, 1.0])).amax() < 1e-10);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let region = RegionBuilder::uniform_box(2, -10.0, 10.0)
            .less_eq("sum", vec![(0, 1.0), (1, 1.0)], 2.0)
            .equal("line", vec![(0, 1.0), (1, -1.0)], 0.5)
            .build()
            .unwrap();
        let z = v(&[0.25, -0.25]);
        let p = project_polyhedron(&z, &region, 1e-12).unwrap();
        assert!((p - z).amax() < 1e-12);
    }

    #[test]
    fn box_and_row_interact() {
        // Projection of (3, 3) onto {x ∈ [0,1]², x1 + x2 ≤ 1.5}: the box clamps
        // to (1, 1), the row then pulls both coordinates down to 0.75.
        let region = RegionBuilder::uniform_box(2, 0.0, 1.0)
            .less_eq("sum", vec![(0, 1.0), (1, 1.0)], 1.5)
            .build()
            .unwrap();
        let p = project_polyhedron(&v(&[3.0, 3.0]), &region, 1e-12).unwrap();
        assert!((p - v(&[0.75, 0.75])).amax() < 1e-10);
        // Asymmetric: z = (3, 0.2): x2 stays at 0.2, x1 clamps at 1 (sum 1.2 ok).
        let p = project_polyhedron(&v(&[3.0, 0.2]), &region, 1e-12).unwrap();
        assert!((p - v(&[1.0, 0.2])).amax() < 1e-10);
    }

    #[test]
    fn warm_projector_matches_cold() {
        let region = RegionBuilder::uniform_box(3, -1.0, 1.0)
            .equal("e", vec![(0, 1.0), (1, 1.0), (2, 1.0)], 0.5)
            .less_eq("l", vec![(0, 1.0), (2, -2.0)], 0.1)
            .build()
            .unwrap();
        let mut warm = PolyhedralProjector::new(&region);
        for k in 0..20 {
            let t = k as f64 * 0.3;
            let z = v(&[t.sin() * 2.0, t.cos(), 0.5 - t.sin()]);
            let a = warm.project(&z, 1e-12).unwrap();
            let b = project_polyhedron(&z, &region, 1e-12).unwrap();
            assert!((a - b).amax() < 1e-9);
        }
    }
}
