//! Finite-volume IMEX integration of
//! `u_t = (1/r)(r u_r - r u v_r)_r + kappa(r) u - mu(r) u^p`.
//!
//! Control volume `j >= 1` spans the faces `j -/+ 1/2` whose squared radii
//! are cumulative sums of the trapezoid weights, so the volume of cell `j`
//! equals its trapezoid weight and the scheme conserves `2 pi trapezoid(rho u)`
//! to rounding. The face drift `f v_r` is exact from the quadrature identity
//! `r v_r = m r^2 / (2|Omega|) - w`. The origin value is slaved to the first
//! two cells by even extrapolation.

use crate::elliptic::{solve_potential, FieldV};
use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::model::ModelParams;
use crate::stepping::{
    drive, with_halving, Evolving, Snapshot, SolverKind, StepError, StepLimits, StepperConfig,
    Trajectory,
};
use crate::transform::{forward_transform, mass_of_density};
use crate::tridiag;

#[derive(Clone, Debug)]
pub struct SimStateU {
    pub t: f64,
    pub u: FieldU,
    pub v: FieldV,
    pub m: f64,
    /// Last accepted step (`0` before the first step).
    pub dt: f64,
    pub step_count: usize,
    /// Negative mass removed by clipping in the last step.
    pub clipped_mass: f64,
    w: FieldW,
}

impl SimStateU {
    pub fn new(u: FieldU, params: &ModelParams, grid: &RadialGrid) -> Result<Self> {
        u.check_grid(grid)?;
        if let Some(j) = u.values().iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite initial density at node {j}"
            )));
        }
        let w = forward_transform(&u, grid)?;
        let m = mass_of_density(&u, grid);
        let v = solve_potential(&w, m, params, grid)?;
        Ok(SimStateU {
            t: 0.0,
            u,
            v,
            m,
            dt: 0.0,
            step_count: 0,
            clipped_mass: 0.0,
            w,
        })
    }

    /// Cumulative mass of the current density.
    pub fn w(&self) -> &FieldW {
        &self.w
    }
}

/// Per-grid coefficients of the finite-volume operator.
struct Geometry {
    /// Conductances `f_{j+1/2} / (r_{j+1} - r_j)`, `j = 0..N-1`.
    cond: Vec<f64>,
    /// Cell volumes (trapezoid weights).
    vol: Vec<f64>,
}

impl Geometry {
    fn new(grid: &RadialGrid) -> Self {
        let r = grid.r();
        let fsq = grid.face_sq();
        let cond = (0..grid.n_cells())
            .map(|j| fsq[j].sqrt() / (r[j + 1] - r[j]))
            .collect();
        Geometry {
            cond,
            vol: grid.rho_weights().to_vec(),
        }
    }
}

/// Face drift `A_{j+1/2} = f v_r` for `j = 0..N`; zero at both ends.
fn face_drift(u: &[f64], m: f64, params: &ModelParams, grid: &RadialGrid) -> Vec<f64> {
    let fsq = grid.face_sq();
    let vol = grid.rho_weights();
    let n = grid.n_cells();
    let half_density = m / (2.0 * params.omega_area());
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for j in 0..=n {
        acc += vol[j] * u[j];
        out.push(half_density * fsq[j] - acc);
    }
    out[0] = 0.0;
    out[n] = 0.0;
    out
}

/// Upwinded advective flux `-A u_upwind` through face `j + 1/2`.
#[inline]
fn advective_flux(a: f64, left: f64, right: f64) -> f64 {
    // cells drift up the chemical gradient, with velocity v_r
    -a * if a > 0.0 { left } else { right }
}

fn reaction(u: f64, kappa: f64, mu: f64, p: f64) -> f64 {
    kappa * u - mu * u.max(0.0).powf(p)
}

/// Even quadratic through `(r1, u1)`, `(r2, u2)` evaluated at the origin.
fn origin_value(u: &[f64], r: &[f64]) -> f64 {
    let (s1, s2) = (r[1] * r[1], r[2] * r[2]);
    ((u[1] * s2 - u[2] * s1) / (s2 - s1)).max(0.0)
}

struct Coefficients {
    kappa: Vec<f64>,
    mu: Vec<f64>,
}

impl Coefficients {
    fn new(params: &ModelParams, grid: &RadialGrid) -> Self {
        Coefficients {
            kappa: grid.r().iter().map(|&r| params.kappa.eval(r)).collect(),
            mu: grid.r().iter().map(|&r| params.mu.eval(r)).collect(),
        }
    }
}

fn tendency(
    u: &[f64],
    m: f64,
    params: &ModelParams,
    grid: &RadialGrid,
    geo: &Geometry,
    co: &Coefficients,
) -> Vec<f64> {
    let n = grid.n_cells();
    let a = face_drift(u, m, params, grid);
    let mut out = vec![0.0; n + 1];
    let flux = |j: usize| -> f64 {
        if j == 0 || j == n + 1 {
            return 0.0;
        }
        let k = j - 1;
        geo.cond[k] * (u[k + 1] - u[k]) + advective_flux(a[k], u[k], u[k + 1])
    };
    // flux(j) is the flux through face j - 1/2
    for j in 1..=n {
        out[j] =
            (flux(j + 1) - flux(j)) / geo.vol[j] + reaction(u[j], co.kappa[j], co.mu[j], params.p);
    }
    out[0] = {
        let r = grid.r();
        let (s1, s2) = (r[1] * r[1], r[2] * r[2]);
        (out[1] * s2 - out[2] * s1) / (s2 - s1)
    };
    out
}

/// Finite-volume tendency `du/dt` at every node.
pub fn rhs_u(state: &SimStateU, params: &ModelParams, grid: &RadialGrid) -> Result<Vec<f64>> {
    state.u.check_grid(grid)?;
    Ok(tendency(
        state.u.values(),
        state.m,
        params,
        grid,
        &Geometry::new(grid),
        &Coefficients::new(params, grid),
    ))
}

struct Stepper<'a> {
    params: &'a ModelParams,
    grid: &'a RadialGrid,
    geo: Geometry,
    co: Coefficients,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, grid: &'a RadialGrid) -> Self {
        Stepper {
            params,
            grid,
            geo: Geometry::new(grid),
            co: Coefficients::new(params, grid),
        }
    }

    fn stable_dt(&self, state: &SimStateU) -> f64 {
        let u = state.u.values();
        let a = face_drift(u, state.m, self.params, self.grid);
        let p = self.params.p;
        let mut rate: f64 = 0.0;
        for j in 1..u.len() {
            let out = a[j].max(0.0) + (-a[j - 1]).max(0.0);
            let damp = self.co.mu[j] * u[j].max(0.0).powf(p - 1.0);
            rate = rate.max(out / self.geo.vol[j] + damp);
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    /// One IMEX step of size `dt`; `Err` carries the rejection reason.
    fn try_step(
        &self,
        state: &SimStateU,
        dt: f64,
        limits: &StepLimits,
    ) -> std::result::Result<SimStateU, String> {
        let grid = self.grid;
        let n = grid.n_cells();
        let u = state.u.values();
        let a = face_drift(u, state.m, self.params, grid);
        let geo = &self.geo;
        let p = self.params.p;

        // explicit advection and reaction, right-hand side of the implicit solve
        let mut rhs = Vec::with_capacity(n);
        for j in 1..=n {
            let f_out = if j < n {
                advective_flux(a[j], u[j], u[j + 1])
            } else {
                0.0
            };
            let f_in = advective_flux(a[j - 1], u[j - 1], u[j]);
            let f_in = if j == 1 { 0.0 } else { f_in };
            let explicit =
                (f_out - f_in) / geo.vol[j] + reaction(u[j], self.co.kappa[j], self.co.mu[j], p);
            rhs.push(geo.vol[j] * (u[j] + dt * explicit));
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err("non-finite explicit update".into());
        }
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for (i, j) in (1..=n).enumerate() {
            let cm = if j > 1 { geo.cond[j - 1] } else { 0.0 };
            let cp = if j < n { geo.cond[j] } else { 0.0 };
            lo[i] = -dt * cm;
            up[i] = -dt * cp;
            di[i] = geo.vol[j] + dt * (cm + cp);
        }
        let mut scratch = Vec::new();
        tridiag::solve_in_place(&lo, &di, &up, &mut rhs, &mut scratch);

        let mut next = Vec::with_capacity(n + 1);
        next.push(0.0);
        let mut clipped = 0.0;
        for (j, x) in rhs.into_iter().enumerate() {
            if !x.is_finite() {
                return Err("non-finite implicit solve".into());
            }
            if x < 0.0 {
                clipped -= x * geo.vol[j + 1];
                next.push(0.0);
            } else {
                next.push(x);
            }
        }
        next[0] = origin_value(&next, grid.r());
        clipped *= 2.0 * std::f64::consts::PI;
        if clipped > limits.clip_fraction * limits.m_ref {
            return Err(format!("clipped mass {clipped:e} above limit"));
        }
        let u_new = FieldU::new(next);
        let linf_old = state.u.linf();
        let linf_new = u_new.linf();
        if linf_new > (1.0 + limits.max_growth) * linf_old && linf_old > 0.0 {
            return Err(format!("maximum grew from {linf_old:e} to {linf_new:e}"));
        }
        let w = FieldW::new(crate::transform::cumulative_rho_trapezoid(
            u_new.values(),
            grid.r(),
        ));
        let m = mass_of_density(&u_new, grid);
        let v = solve_potential(&w, m, self.params, grid).map_err(|e| e.to_string())?;
        Ok(SimStateU {
            t: state.t + dt,
            u: u_new,
            v,
            m,
            dt,
            step_count: state.step_count + 1,
            clipped_mass: clipped,
            w,
        })
    }

    fn advance(
        &self,
        state: &SimStateU,
        dt: f64,
        limits: &StepLimits,
    ) -> std::result::Result<(SimStateU, f64), StepError> {
        if state.u.values().iter().any(|x| !x.is_finite()) {
            return Err(StepError::Numerical("non-finite density in state".into()));
        }
        with_halving(dt, limits.dt_min, |h| self.try_step(state, h, limits))
    }
}

/// Advance by one step of size `dt`, halving on rejection.
///
/// Returns the accepted state; its `dt` field is the step actually taken.
pub fn step_u(
    state: &SimStateU,
    params: &ModelParams,
    grid: &RadialGrid,
    dt: f64,
    limits: &StepLimits,
) -> std::result::Result<SimStateU, StepError> {
    if !(dt > 0.0) {
        return Err(StepError::Numerical(format!(
            "step size must be positive, got {dt}"
        )));
    }
    Stepper::new(params, grid)
        .advance(state, dt, limits)
        .map(|x| x.0)
}

struct Bound<'a> {
    state: SimStateU,
    stepper: &'a Stepper<'a>,
}

impl Evolving for Bound<'_> {
    const KIND: SolverKind = SolverKind::Primitive;

    fn time(&self) -> f64 {
        self.state.t
    }
    fn mass(&self) -> f64 {
        self.state.m
    }
    fn density(&self) -> &FieldU {
        &self.state.u
    }
    fn cumulative(&self) -> &FieldW {
        &self.state.w
    }
    fn clipped_mass(&self) -> f64 {
        self.state.clipped_mass
    }
    fn step_count(&self) -> usize {
        self.state.step_count
    }
    fn stable_dt(&self) -> f64 {
        self.stepper.stable_dt(&self.state)
    }
    fn advance(&self, dt: f64, limits: &StepLimits) -> std::result::Result<(Self, f64), StepError> {
        let (state, used) = self.stepper.advance(&self.state, dt, limits)?;
        Ok((
            Bound {
                state,
                stepper: self.stepper,
            },
            used,
        ))
    }
    fn set_time(&mut self, t: f64) {
        self.state.t = t;
    }
}

/// Integrate from `u0` to `cfg.t_end`, calling `observer` at every snapshot.
pub fn run_u(
    u0: &FieldU,
    params: &ModelParams,
    grid: &RadialGrid,
    cfg: &StepperConfig,
    observer: &mut dyn FnMut(&Snapshot),
) -> Result<Trajectory> {
    let state = SimStateU::new(u0.clone(), params, grid)?;
    let stepper = Stepper::new(params, grid);
    drive(
        Bound {
            state,
            stepper: &stepper,
        },
        cfg,
        observer,
    )
}
