//! Change of variables between the density `u(r)` and the cumulative mass
//! `w(s) = int_0^sqrt(s) rho u(rho) d rho`, with `w_s = u / 2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::stencil;

/// Cumulative trapezoid of `rho u(rho)` in `r`. Nondecreasing for `u >= 0`.
pub fn forward_transform(u: &FieldU, grid: &RadialGrid) -> Result<FieldW> {
    u.check_grid(grid)?;
    if let Some(j) = u.values().iter().position(|x| !(*x >= 0.0)) {
        return Err(Error::Domain(format!(
            "density must be nonnegative, u[{j}] = {:e}",
            u.values()[j]
        )));
    }
    Ok(FieldW::new(cumulative_rho_trapezoid(u.values(), grid.r())))
}

pub(crate) fn cumulative_rho_trapezoid(u: &[f64], r: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(u.len());
    w.push(0.0);
    let mut acc = 0.0;
    for j in 0..u.len() - 1 {
        acc += 0.5 * (r[j + 1] - r[j]) * (r[j] * u[j] + r[j + 1] * u[j + 1]);
        w.push(acc);
    }
    w
}

/// Discrete `w_s` on the s-grid (no clamping).
pub fn ws_derivative(w: &FieldW, grid: &RadialGrid) -> Result<Vec<f64>> {
    w.check_grid(grid)?;
    Ok(stencil::derivative(grid.s(), w.values()))
}

/// `u = 2 w_s`, clamped at zero from below.
pub fn recover_u(w: &FieldW, grid: &RadialGrid) -> Result<FieldU> {
    let mut d = ws_derivative(w, grid)?;
    for x in d.iter_mut() {
        *x = (2.0 * *x).max(0.0);
    }
    Ok(FieldU::new(d))
}

/// `m = 2 pi w(R^2)`.
pub fn total_mass(w: &FieldW) -> f64 {
    2.0 * PI * w.values().last().copied().unwrap_or(0.0)
}

/// `2 pi * trapezoid(rho u)` without building the cumulative field.
pub fn mass_of_density(u: &FieldU, grid: &RadialGrid) -> f64 {
    2.0 * PI
        * u.values()
            .iter()
            .zip(grid.rho_weights())
            .map(|(u, w)| u * w)
            .sum::<f64>()
}
