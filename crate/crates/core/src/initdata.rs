//! Radially nonincreasing, continuous initial densities with prescribed
//! total mass and prescribed mass inside a small ball.
//!
//! Profiles have the form `u = c + H g(r / r1)` with `g` nonincreasing,
//! `g = 0` beyond `1`. The two discrete constraints are linear in
//! `(c, H)`, so they are solved directly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::grid::{FieldU, RadialGrid};
use crate::transform::mass_of_density;

/// Relative excess over `m_tilde` aimed for, so rounding keeps the bound.
const CONCENTRATION_EXCESS: f64 = 1e-9;
/// Fewest nodes inside `r1` for the bump to be resolved.
pub const MIN_NODES_INSIDE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Flat top on `[0, r1/2]`, cosine taper on `[r1/2, r1]`.
    PlateauTail,
    /// `(1 + cos(pi r / r1)) / 2` on `[0, r1]`.
    CosineCap,
    /// `u = m0 / (pi R^2)`; `r1` and `m_tilde` are ignored.
    Constant,
}

impl Profile {
    fn shape(self, x: f64) -> f64 {
        match self {
            Profile::PlateauTail if x <= 0.5 => 1.0,
            Profile::PlateauTail if x < 1.0 => 0.5 * (1.0 + (PI * (2.0 * x - 1.0)).cos()),
            Profile::CosineCap if x < 1.0 => 0.5 * (1.0 + (PI * x).cos()),
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub m0: f64,
    pub r1: f64,
    pub m_tilde: f64,
    pub profile: Profile,
}

impl BumpSpec {
    /// Data meeting a certificate's concentration requirement inside the
    /// radius of area `lambda s0`.
    pub fn from_certificate(cert: &Certificate, profile: Profile) -> Self {
        BumpSpec {
            m0: cert.m0,
            r1: cert.r1_area,
            m_tilde: cert.m_tilde,
            profile,
        }
    }

    fn validate(&self, radius: f64) -> Result<()> {
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return Err(Error::Config(format!("m0 = {} must be positive", self.m0)));
        }
        if self.profile == Profile::Constant {
            return Ok(());
        }
        if !(self.r1 > 0.0 && self.r1 < radius) {
            return Err(Error::Config(format!(
                "r1 = {:e} must lie in (0, R)",
                self.r1
            )));
        }
        if !(self.m_tilde >= 0.0 && self.m_tilde < self.m0) {
            return Err(Error::Config(format!(
                "m_tilde = {:e} must lie in [0, m0 = {:e})",
                self.m_tilde, self.m0
            )));
        }
        Ok(())
    }
}

/// `2 pi int_0^{r1} rho u d rho`, trapezoid with linear interpolation at `r1`.
pub fn concentration(u: &FieldU, r1: f64, grid: &RadialGrid) -> Result<f64> {
    u.check_grid(grid)?;
    if !(r1 > 0.0 && r1 <= grid.radius()) {
        return Err(Error::Domain(format!("r1 = {r1:e} must lie in (0, R]")));
    }
    let r = grid.r();
    let uv = u.values();
    let k = grid.locate_r(r1);
    let mut acc = 0.0;
    for j in 0..k {
        acc += 0.5 * (r[j + 1] - r[j]) * (r[j] * uv[j] + r[j + 1] * uv[j + 1]);
    }
    if k < r.len() - 1 && r1 > r[k] {
        let theta = (r1 - r[k]) / (r[k + 1] - r[k]);
        let f0 = r[k] * uv[k];
        let f1 = r[k + 1] * uv[k + 1];
        let fr = f0 + theta * (f1 - f0);
        acc += 0.5 * (r1 - r[k]) * (f0 + fr);
    }
    Ok(2.0 * PI * acc)
}

/// Nonincreasing continuous `u0` with mass `m0` and at least `m_tilde`
/// inside `r1`.
pub fn build_initial_data(spec: &BumpSpec, grid: &RadialGrid) -> Result<FieldU> {
    spec.validate(grid.radius())?;
    let radius = grid.radius();
    if spec.profile == Profile::Constant {
        return Ok(FieldU::from_fn(grid, |_| spec.m0 / (PI * radius * radius)));
    }
    let inside = grid.r().iter().filter(|&&r| r < spec.r1).count();
    if inside < MIN_NODES_INSIDE {
        return Err(Error::Infeasible(format!(
            "only {inside} nodes inside r1 = {:e}; refine the grid near the origin",
            spec.r1
        )));
    }
    let ones = FieldU::from_fn(grid, |_| 1.0);
    let bump = FieldU::from_fn(grid, |r| spec.profile.shape(r / spec.r1));
    let (m1, mg) = (mass_of_density(&ones, grid), mass_of_density(&bump, grid));
    let (c1, cg) = (
        concentration(&ones, spec.r1, grid)?,
        concentration(&bump, spec.r1, grid)?,
    );
    let target = spec.m_tilde * (1.0 + CONCENTRATION_EXCESS);
    // c m1 + h mg = m0 and c c1 + h cg = target
    let det = m1 * cg - mg * c1;
    let mut h = (m1 * target - c1 * spec.m0) / det;
    if !(h > 0.0) {
        h = 0.0;
    }
    let c = (spec.m0 - h * mg) / m1;
    if c < 0.0 {
        return Err(Error::Infeasible(format!(
            "tail density would be negative ({c:e}): m_tilde = {:e} is too close to m0 = {:e} for r1 = {:e}",
            spec.m_tilde, spec.m0, spec.r1
        )));
    }
    let u: Vec<f64> = bump.values().iter().map(|g| c + h * g).collect();
    let u = FieldU::new(u);
    let achieved = concentration(&u, spec.r1, grid)?;
    if achieved < spec.m_tilde {
        return Err(Error::Infeasible(format!(
            "achieved concentration {achieved:e} below m_tilde = {:e}",
            spec.m_tilde
        )));
    }
    Ok(u)
}
