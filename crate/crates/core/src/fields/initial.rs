use std::sync::Arc;

use super::field::{Field, VectorField};
use super::grid::Grid;
use crate::error::{Error, Result};

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = f(t);
    a / (a + f(1.0 - t))
}

/// Smooth wall cut-off: 0 within `delta/4` of a wall, 1 beyond `delta/2`.
///
/// On a fully periodic grid the profile is the constant 1.
pub fn cutoff_profile(grid: &Arc<Grid>, delta: f64) -> Result<Field> {
    if grid.is_periodic() {
        return Ok(Field::scalar_constant(grid, 1.0));
    }
    let min_len = grid
        .axes()
        .iter()
        .map(|a| a.length)
        .fold(f64::INFINITY, f64::min);
    if !(delta > 0.0 && delta < min_len) {
        return Err(Error::InvalidArgument(format!(
            "cut-off width {delta} must lie in (0, {min_len})"
        )));
    }
    let q = delta / 4.0;
    Ok(Field::scalar_fn(grid, |x| {
        smooth_step((grid.wall_distance(x) - q) / q)
    }))
}

/// Regularized initial data.
#[derive(Clone, Debug)]
pub struct RegularizedData {
    pub rho: Field,
    pub z: Field,
    pub q: VectorField,
}

/// Check `c_lo * rho <= z <= c_hi * rho` and nonnegativity up to rounding.
pub fn check_band(rho: &Field, z: &Field, c_lo: f64, c_hi: f64) -> Result<()> {
    let scale = rho.sup_norm().max(z.sup_norm()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    if rho.min() < -tol || z.min() < -tol {
        return Err(Error::Band("densities must be nonnegative".into()));
    }
    let lo = z.zip_map(rho, |zv, r| c_lo * r - zv).max();
    let hi = z.zip_map(rho, |zv, r| zv - c_hi * r).max();
    if lo > tol || hi > tol {
        return Err(Error::Band(format!(
            "c_lo*rho - Z reaches {lo:e}, Z - c_hi*rho reaches {hi:e}"
        )));
    }
    Ok(())
}

/// Cut off near walls, lift by `delta`, and mollify at radius `delta`.
///
/// Densities are lifted with weights 1 and `z0` so the band survives by
/// linearity and kernel positivity.
pub fn regularize_initial_data(
    rho0: &Field,
    z0_field: &Field,
    q0: &VectorField,
    delta: f64,
    band: (f64, f64),
    z0: f64,
) -> Result<RegularizedData> {
    let (c_lo, c_hi) = band;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if !(c_lo > 0.0 && c_lo <= c_hi) {
        return Err(Error::InvalidArgument(format!("invalid band [{c_lo}, {c_hi}]")));
    }
    if !(c_lo..=c_hi).contains(&z0) {
        return Err(Error::InvalidArgument(format!(
            "lift weight {z0} outside band [{c_lo}, {c_hi}]"
        )));
    }
    check_band(rho0, z0_field, c_lo, c_hi)?;
    let grid = rho0.grid();
    let phi = if grid.is_periodic() {
        Field::scalar_constant(grid, 1.0)
    } else {
        let min_len = grid.axes().iter().map(|a| a.length).fold(f64::INFINITY, f64::min);
        cutoff_profile(grid, delta.min(0.5 * min_len))?
    };
    let rho = rho0.mul(&phi).shift(delta).mollify(delta)?;
    let z = z0_field.mul(&phi).shift(delta * z0).mollify(delta)?;
    let q = q0
        .map_components(|c| c.zip_map(&phi, |a, b| a * b))
        .mollify(delta)?;
    Ok(RegularizedData { rho, z, q })
}
