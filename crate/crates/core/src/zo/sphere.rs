use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Uniform draw from the unit sphere in `ℝ^m` (normalised Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<DVector<f64>> {
    if m == 0 {
        return Err(Error::invalid("sphere dimension must be at least 1"));
    }
    loop {
        let g: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let n = g.norm();
        // An all-zero (or denormal) draw cannot be normalised; draw again.
        if n > 1e-150 && n.is_finite() {
            return Ok(g / n);
        }
    }
}
