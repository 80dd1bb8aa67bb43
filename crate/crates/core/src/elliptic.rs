//! Radial solution of `0 = Delta v - m/|Omega| + u` with Neumann data and
//! zero mean, by the explicit quadrature `r v_r = m r^2 / (2|Omega|) - w(r^2)`.

use crate::error::{check_len, Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::model::ModelParams;
use crate::transform::total_mass;

/// Relative tolerance for `m = 2 pi w(R^2)`.
pub const MASS_CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldV {
    pub v: Vec<f64>,
    pub vr: Vec<f64>,
}

fn check_mass(w: &FieldW, m: f64) -> Result<()> {
    let field = total_mass(w);
    let scale = field.abs().max(m.abs());
    if (field - m).abs() > MASS_CONSISTENCY_TOL * scale {
        return Err(Error::Consistency { field, given: m });
    }
    Ok(())
}

/// `v_r(r_j) = [m r_j^2 / (2|Omega|) - w(s_j)] / r_j`, `v_r(0) = 0`.
pub fn solve_vr(w: &FieldW, m: f64, params: &ModelParams, grid: &RadialGrid) -> Result<Vec<f64>> {
    w.check_grid(grid)?;
    check_mass(w, m)?;
    let half_density = m / (2.0 * params.omega_area());
    let mut vr = Vec::with_capacity(grid.n_nodes());
    vr.push(0.0);
    for ((r, s), wj) in grid.r().iter().zip(grid.s()).zip(w.values()).skip(1) {
        vr.push((half_density * s - wj) / r);
    }
    Ok(vr)
}

/// Trapezoid antiderivative of `v_r`, shifted so the discrete mean over the
/// disk vanishes.
pub fn integrate_v(vr: &[f64], grid: &RadialGrid) -> Result<FieldV> {
    check_len(grid.n_nodes(), vr.len())?;
    let r = grid.r();
    let mut v = Vec::with_capacity(vr.len());
    v.push(0.0);
    let mut acc = 0.0;
    for j in 0..vr.len() - 1 {
        acc += 0.5 * (r[j + 1] - r[j]) * (vr[j] + vr[j + 1]);
        v.push(acc);
    }
    let weights = grid.rho_weights();
    let area: f64 = weights.iter().sum();
    let mean = v.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / area;
    for x in v.iter_mut() {
        *x -= mean;
    }
    Ok(FieldV { v, vr: vr.to_vec() })
}

/// Both steps in one call.
pub fn solve_potential(
    w: &FieldW,
    m: f64,
    params: &ModelParams,
    grid: &RadialGrid,
) -> Result<FieldV> {
    let vr = solve_vr(w, m, params, grid)?;
    integrate_v(&vr, grid)
}

/// `v_rr = m/|Omega| - u - v_r / r`; at the origin `(m/|Omega| - u_0) / 2`.
pub fn compute_vrr(
    u: &FieldU,
    vr: &[f64],
    m: f64,
    params: &ModelParams,
    grid: &RadialGrid,
) -> Result<Vec<f64>> {
    u.check_grid(grid)?;
    check_len(grid.n_nodes(), vr.len())?;
    let mean_density = m / params.omega_area();
    let uv = u.values();
    let mut out = Vec::with_capacity(uv.len());
    out.push(0.5 * (mean_density - uv[0]));
    for j in 1..uv.len() {
        out.push(mean_density - uv[j] - vr[j] / grid.r()[j]);
    }
    Ok(out)
}
