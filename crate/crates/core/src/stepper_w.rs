//! IMEX integration of the cumulative-mass equation
//! `w_t = 4 s w_ss + 2 w w_s - (m/|Omega|) s w_s
//!        + int_0^s (kappa(sqrt sigma) w_s - 2^(p-1) mu(sqrt sigma) w_s^p) d sigma`
//! on the s-grid, with `w(0) = 0` pinned and `w(R^2)` driven by the mass law.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::model::ModelParams;
use crate::stencil::{d2_centered, derivative};
use crate::stepping::{
    drive, with_halving, Evolving, Snapshot, SolverKind, StepError, StepLimits, StepperConfig,
    Trajectory,
};
use crate::transform::{recover_u, total_mass};
use crate::tridiag;

/// Relative tolerance below which a decrease of `w` is not a violation.
pub const MONOTONICITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SimStateW {
    pub t: f64,
    pub w: FieldW,
    /// `2 pi w_N`.
    pub m: f64,
    /// Last accepted step (`0` before the first step).
    pub dt: f64,
    pub step_count: usize,
    u: FieldU,
}

impl SimStateW {
    pub fn new(w: FieldW, grid: &RadialGrid) -> Result<Self> {
        w.check_grid(grid)?;
        let v = w.values();
        if let Some(j) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite initial w at node {j}"
            )));
        }
        if v[0] != 0.0 {
            return Err(Error::Domain(format!(
                "w must vanish at s = 0, got {:e}",
                v[0]
            )));
        }
        let tol = MONOTONICITY_TOL * v[v.len() - 1].abs();
        if let Some(j) = v.windows(2).position(|p| p[1] < p[0] - tol) {
            return Err(Error::Domain(format!(
                "w must be nondecreasing, fails at node {}",
                j + 1
            )));
        }
        let u = recover_u(&w, grid)?;
        Ok(SimStateW {
            t: 0.0,
            m: total_mass(&w),
            w,
            dt: 0.0,
            step_count: 0,
            u,
        })
    }

    /// Density recovered as `2 w_s`.
    pub fn u(&self) -> &FieldU {
        &self.u
    }
}

struct Operator {
    /// `4 s_j` times the second-difference coefficients, interior nodes.
    diff: Vec<(f64, f64, f64)>,
    kappa: Vec<f64>,
    mu: Vec<f64>,
    two_pm1: f64,
}

impl Operator {
    fn new(params: &ModelParams, grid: &RadialGrid) -> Self {
        let s = grid.s();
        let n = grid.n_cells();
        let mut diff = vec![(0.0, 0.0, 0.0); n + 1];
        for j in 1..n {
            let (a, b, c) = d2_centered(s[j] - s[j - 1], s[j + 1] - s[j]);
            let k = 4.0 * s[j];
            diff[j] = (k * a, k * b, k * c);
        }
        Operator {
            diff,
            kappa: grid.r().iter().map(|&r| params.kappa.eval(r)).collect(),
            mu: grid.r().iter().map(|&r| params.mu.eval(r)).collect(),
            two_pm1: 2f64.powf(params.p - 1.0),
        }
    }

    /// Cumulative trapezoid in `s` of the nonlocal reaction integrand.
    fn nonlocal(&self, ws: &[f64], p: f64, s: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = ws
            .iter()
            .enumerate()
            .map(|(j, &d)| self.kappa[j] * d - self.two_pm1 * self.mu[j] * d.max(0.0).powf(p))
            .collect();
        let mut out = Vec::with_capacity(g.len());
        out.push(0.0);
        let mut acc = 0.0;
        for j in 1..g.len() {
            acc += 0.5 * (s[j] - s[j - 1]) * (g[j] + g[j - 1]);
            out.push(acc);
        }
        out
    }

    /// Upwinded `(2 w - (m/|Omega|) s) w_s` at interior nodes.
    fn advection(w: &[f64], m: f64, params: &ModelParams, s: &[f64]) -> Vec<f64> {
        let n = w.len() - 1;
        let mean_density = m / params.omega_area();
        let mut out = vec![0.0; n + 1];
        for j in 1..n {
            let a = 2.0 * w[j] - mean_density * s[j];
            let slope = if a > 0.0 {
                (w[j + 1] - w[j]) / (s[j + 1] - s[j])
            } else {
                (w[j] - w[j - 1]) / (s[j] - s[j - 1])
            };
            out[j] = a * slope;
        }
        out
    }
}

fn tendency(w: &[f64], m: f64, params: &ModelParams, grid: &RadialGrid, op: &Operator) -> Vec<f64> {
    let s = grid.s();
    let n = grid.n_cells();
    let ws = derivative(s, w);
    let j_int = op.nonlocal(&ws, params.p, s);
    let adv = Operator::advection(w, m, params, s);
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        let (a, b, c) = op.diff[j];
        out[j] = a * w[j - 1] + b * w[j] + c * w[j + 1] + adv[j] + j_int[j];
    }
    out[n] = j_int[n];
    out
}

/// Tendency `dw/dt` at every s-node; zero at `s = 0`, the mass law at `s = R^2`.
pub fn rhs_w(state: &SimStateW, params: &ModelParams, grid: &RadialGrid) -> Result<Vec<f64>> {
    state.w.check_grid(grid)?;
    let op = Operator::new(params, grid);
    Ok(tendency(state.w.values(), state.m, params, grid, &op))
}

struct Stepper<'a> {
    params: &'a ModelParams,
    grid: &'a RadialGrid,
    op: Operator,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, grid: &'a RadialGrid) -> Self {
        Stepper {
            params,
            grid,
            op: Operator::new(params, grid),
        }
    }

    fn stable_dt(&self, state: &SimStateW) -> f64 {
        let w = state.w.values();
        let s = self.grid.s();
        let n = w.len() - 1;
        let mean_density = state.m / self.params.omega_area();
        let p = self.params.p;
        let mut rate = mean_density.abs();
        for j in 1..n {
            let a = 2.0 * w[j] - mean_density * s[j];
            let h = if a > 0.0 {
                s[j + 1] - s[j]
            } else {
                s[j] - s[j - 1]
            };
            let ws = ((w[j + 1] - w[j - 1]) / (s[j + 1] - s[j - 1])).max(0.0);
            let react = self.op.two_pm1 * self.op.mu[j] * ws.powf(p - 1.0);
            rate = rate.max(a.abs() / h + react);
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn try_step(
        &self,
        state: &SimStateW,
        dt: f64,
        limits: &StepLimits,
    ) -> std::result::Result<SimStateW, String> {
        let grid = self.grid;
        let s = grid.s();
        let n = grid.n_cells();
        let w = state.w.values();
        let ws = derivative(s, w);
        let j_int = self.op.nonlocal(&ws, self.params.p, s);
        let adv = Operator::advection(w, state.m, self.params, s);

        let w_n = w[n] + dt * j_int[n];
        let k = n - 1;
        let mut lo = vec![0.0; k];
        let mut di = vec![0.0; k];
        let mut up = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for (i, j) in (1..n).enumerate() {
            let (a, b, c) = self.op.diff[j];
            lo[i] = -dt * a;
            di[i] = 1.0 - dt * b;
            up[i] = -dt * c;
            rhs[i] = w[j] + dt * (adv[j] + j_int[j]);
        }
        rhs[k - 1] += dt * self.op.diff[n - 1].2 * w_n;
        if rhs.iter().any(|x| !x.is_finite()) || !w_n.is_finite() {
            return Err("non-finite explicit update".into());
        }
        let mut scratch = Vec::new();
        tridiag::solve_in_place(&lo, &di, &up, &mut rhs, &mut scratch);

        let mut next = Vec::with_capacity(n + 1);
        next.push(0.0);
        next.extend_from_slice(&rhs);
        next.push(w_n);
        if next.iter().any(|x| !x.is_finite()) {
            return Err("non-finite implicit solve".into());
        }
        let tol = MONOTONICITY_TOL * w_n.abs();
        if let Some(j) = next.windows(2).position(|p| p[1] < p[0] - tol) {
            return Err(format!("monotonicity lost at node {}", j + 1));
        }
        let w_new = FieldW::new(next);
        let u_new = recover_u(&w_new, grid).map_err(|e| e.to_string())?;
        let linf_old = state.u.linf();
        let linf_new = u_new.linf();
        if linf_new > (1.0 + limits.max_growth) * linf_old && linf_old > 0.0 {
            return Err(format!("maximum grew from {linf_old:e} to {linf_new:e}"));
        }
        Ok(SimStateW {
            t: state.t + dt,
            m: 2.0 * PI * w_n,
            w: w_new,
            dt,
            step_count: state.step_count + 1,
            u: u_new,
        })
    }

    fn advance(
        &self,
        state: &SimStateW,
        dt: f64,
        limits: &StepLimits,
    ) -> std::result::Result<(SimStateW, f64), StepError> {
        if state.w.values().iter().any(|x| !x.is_finite()) {
            return Err(StepError::Numerical("non-finite w in state".into()));
        }
        with_halving(dt, limits.dt_min, |h| self.try_step(state, h, limits))
    }
}

/// Advance by one step of size `dt`, halving on rejection.
pub fn step_w(
    state: &SimStateW,
    params: &ModelParams,
    grid: &RadialGrid,
    dt: f64,
    limits: &StepLimits,
) -> std::result::Result<SimStateW, StepError> {
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
    state: SimStateW,
    stepper: &'a Stepper<'a>,
}

impl Evolving for Bound<'_> {
    const KIND: SolverKind = SolverKind::Mass;

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

/// Integrate from `w0` to `cfg.t_end`; snapshots carry `u = recover_u(w)`.
pub fn run_w(
    w0: &FieldW,
    params: &ModelParams,
    grid: &RadialGrid,
    cfg: &StepperConfig,
    observer: &mut dyn FnMut(&Snapshot),
) -> Result<Trajectory> {
    let state = SimStateW::new(w0.clone(), grid)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientFn;
    use crate::stepping::Outcome;

    fn params(kappa: f64, mu: CoefficientFn) -> ModelParams {
        ModelParams::new(1.0, 2.0, 2.0, 1.0, CoefficientFn::Const(kappa), mu).unwrap()
    }

    #[test]
    fn homogeneous_state_is_fixed() {
        let g = RadialGrid::uniform(1.0, 64).unwrap();
        let p = params(0.0, CoefficientFn::Const(0.0));
        let w = FieldW::from_fn(&g, |s| 1.5 * s);
        let st = SimStateW::new(w.clone(), &g).unwrap();
        assert!(rhs_w(&st, &p, &g).unwrap().iter().all(|x| x.abs() < 1e-9));
        let next = step_w(&st, &p, &g, 0.2, &StepLimits::new(1e-12, st.m)).unwrap();
        for (a, b) in next.w.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state() {
        let g = RadialGrid::uniform(1.0, 32).unwrap();
        let p = params(0.3, CoefficientFn::Power { c: 1.0, q: 2.0 });
        let st = SimStateW::new(FieldW::zeros(&g), &g).unwrap();
        assert!(rhs_w(&st, &p, &g).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn boundary_mass_grows_exponentially() {
        let g = RadialGrid::uniform(1.0, 64).unwrap();
        let k = 0.5;
        let p = params(k, CoefficientFn::Const(0.0));
        let w0 = FieldW::from_fn(&g, |s| s);
        let traj = run_w(&w0, &p, &g, &StepperConfig::for_horizon(1.0), &mut |_| {}).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        let exact = 2.0 * PI * k.exp();
        assert!((total_mass(&traj.final_w) - exact).abs() < 1e-2 * exact);
    }

    #[test]
    fn conserves_boundary_value_without_reaction() {
        let g = RadialGrid::uniform(1.0, 128).unwrap();
        let p = params(0.0, CoefficientFn::Const(0.0));
        let u0 = FieldU::from_fn(&g, |r| 10.0 * (-8.0 * r * r).exp());
        let w0 = crate::transform::forward_transform(&u0, &g).unwrap();
        let traj = run_w(&w0, &p, &g, &StepperConfig::for_horizon(0.05), &mut |_| {}).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        assert_eq!(traj.final_w.values()[128], w0.values()[128]);
    }

    #[test]
    fn rejects_invalid_initial_data() {
        let g = RadialGrid::uniform(1.0, 32).unwrap();
        let mut w = FieldW::from_fn(&g, |s| s);
        w.values_mut()[5] = 0.0;
        assert!(SimStateW::new(w, &g).is_err());
        assert!(SimStateW::new(FieldW::from_fn(&g, |s| 1.0 + s), &g).is_err());
    }
}
