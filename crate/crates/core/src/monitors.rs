//! Pointwise checks of the a-priori bounds and the subcritical
//! supersolution comparison. Monitors record, they never abort.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::model::ModelParams;
use crate::stencil;

/// Relative slack of the mass bound.
pub const MASS_SLACK: f64 = 1e-6;
/// Relative slack of the `w_s` bound.
pub const WS_SLACK: f64 = 1e-2;
/// Slack of the monotonicity check, relative to `||u||_inf`.
pub const MONOTONICITY_SLACK: f64 = 1e-8;
/// Slack of the supersolution ordering, relative to `a`.
pub const ORDERING_SLACK: f64 = 1e-6;
const MASS_FLOOR_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-12;

/// `pass` iff `lhs <= rhs + slack`; `margin = rhs - lhs` at the worst node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub name: String,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub margin: f64,
    /// Worst node, if the check is pointwise.
    pub node: Option<usize>,
}

impl MonitorReport {
    fn scalar(name: &str, t: f64, lhs: f64, rhs: f64, slack: f64) -> Self {
        MonitorReport {
            name: name.to_string(),
            t,
            lhs,
            rhs,
            slack,
            pass: lhs <= rhs + slack,
            margin: rhs - lhs,
            node: None,
        }
    }

    /// Worst node of `lhs_j <= rhs_j + slack_j` by normalized excess
    /// `(lhs - rhs) - slack`.
    fn pointwise(name: &str, t: f64, items: impl Iterator<Item = (usize, f64, f64, f64)>) -> Self {
        let mut worst: Option<(usize, f64, f64, f64)> = None;
        for it in items {
            let excess = it.1 - it.2 - it.3;
            if worst.is_none_or(|w| excess > w.1 - w.2 - w.3) {
                worst = Some(it);
            }
        }
        match worst {
            Some((j, lhs, rhs, slack)) => MonitorReport {
                node: Some(j),
                ..MonitorReport::scalar(name, t, lhs, rhs, slack)
            },
            None => MonitorReport::scalar(name, t, 0.0, 0.0, 0.0),
        }
    }
}

/// `0 <= m <= m0 e^{kappa1 t}`, the upper side with relative slack.
pub fn check_mass_bound(m: f64, t: f64, m0: f64, kappa1: f64) -> MonitorReport {
    let bound = m0 * (kappa1 * t).exp();
    let upper = MonitorReport::scalar("mass_bound", t, m, bound, MASS_SLACK * bound);
    if m < -MASS_FLOOR_TOL {
        return MonitorReport {
            pass: false,
            margin: m,
            ..upper
        };
    }
    upper
}

/// `w_s <= m0 e^{kappa1 t} / (2 pi s)` at nodes with `s >= 4 s_1`.
pub fn check_ws_bound(
    w: &FieldW,
    t: f64,
    m0: f64,
    kappa1: f64,
    grid: &RadialGrid,
) -> Result<MonitorReport> {
    w.check_grid(grid)?;
    let s = grid.s();
    let ws = stencil::derivative(s, w.values());
    let cut = 4.0 * grid.first_s_spacing();
    let scale = m0 * (kappa1 * t).exp() / (2.0 * PI);
    Ok(MonitorReport::pointwise(
        "ws_bound",
        t,
        s.iter()
            .zip(ws)
            .enumerate()
            .filter(|(_, (s, _))| **s >= cut)
            .map(|(j, (s, d))| {
                let bound = scale / s;
                (j, d, bound, WS_SLACK * bound)
            }),
    ))
}

/// `u_{j+1} <= u_j + 1e-8 ||u||_inf` for all `j`.
pub fn check_radial_monotonicity(u: &FieldU, t: f64) -> MonitorReport {
    let slack = MONOTONICITY_SLACK * u.linf();
    MonitorReport::pointwise(
        "monotonicity",
        t,
        u.values()
            .windows(2)
            .enumerate()
            .map(|(j, p)| (j + 1, p[1], p[0], slack)),
    )
}

/// `-v_rr <= u` at every node, slack `10 h ||u||_inf` with `h` the largest
/// radial spacing.
pub fn check_vrr_bound(
    u: &FieldU,
    vrr: &[f64],
    t: f64,
    grid: &RadialGrid,
) -> Result<MonitorReport> {
    u.check_grid(grid)?;
    crate::error::check_len(grid.n_nodes(), vrr.len())?;
    let slack = 10.0 * grid.max_r_spacing() * u.linf().max(1.0);
    Ok(MonitorReport::pointwise(
        "vrr_bound",
        t,
        u.values()
            .iter()
            .zip(vrr)
            .enumerate()
            .map(|(j, (u, v))| (j, -v, *u, slack)),
    ))
}

/// `w(s) = a s / (b + s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Supersolution {
    pub a: f64,
    pub b: f64,
}

impl Supersolution {
    pub fn eval(&self, s: f64) -> f64 {
        self.a * s / (self.b + s)
    }

    pub fn ws(&self, s: f64) -> f64 {
        self.a * self.b / (self.b + s).powi(2)
    }

    pub fn wss(&self, s: f64) -> f64 {
        -2.0 * self.a * self.b / (self.b + s).powi(3)
    }
}

const MAX_HALVINGS: usize = 200;

/// `a` at the midpoint of `(m0 / 2 pi, 4)`, then `b` halved from `R^2`
/// until the profile dominates `w0`.
pub fn select_supersolution(m0: f64, w0: &FieldW, grid: &RadialGrid) -> Result<Supersolution> {
    w0.check_grid(grid)?;
    if !(m0 < 8.0 * PI) {
        return Err(Error::Domain(format!(
            "supersolution needs m0 < 8 pi, got m0 / 8pi = {}",
            m0 / (8.0 * PI)
        )));
    }
    let a = (m0 / (2.0 * PI) + 4.0) / 2.0;
    let mut b = grid.radius() * grid.radius();
    for _ in 0..=MAX_HALVINGS {
        let sup = Supersolution { a, b };
        if grid
            .s()
            .iter()
            .zip(w0.values())
            .all(|(&s, &w)| sup.eval(s) - w >= 0.0)
        {
            return Ok(sup);
        }
        b *= 0.5;
    }
    Err(Error::Infeasible(format!(
        "no b in [R^2 2^-{MAX_HALVINGS}, R^2] puts a s / (b + s) above w0"
    )))
}

/// The residual identity of the supersolution: `(8 - 2a) a b s / (b + s)^3 >= 0`.
///
/// Also evaluates the full residual `wbar_t - [4 s wbar_ss + 2 wbar wbar_s
/// - (m/|Omega|) s wbar_s - 2^(p-1) int mu wbar_s^p]` with the smallest
/// (most negative) value over the grid and `m_series` stored in `lhs`.
pub fn check_supersolution_residual(
    sup: &Supersolution,
    params: &ModelParams,
    m_series: &[f64],
    grid: &RadialGrid,
) -> SupersolutionResidual {
    let (a, b) = (sup.a, sup.b);
    let s = grid.s();
    let lower = s
        .iter()
        .map(|&s| (8.0 - 2.0 * a) * a * b * s / (b + s).powi(3))
        .fold(f64::INFINITY, f64::min);
    let identity = MonitorReport::scalar("supersolution_residual", 0.0, -lower, 0.0, RESIDUAL_TOL);

    // remaining terms: -(m/|Omega|) s wbar_s <= 0 enters with a minus sign in
    // the supersolution inequality, and the degradation integral is dropped
    let p = params.p;
    let scale = 2f64.powf(p - 1.0);
    let integrand: Vec<f64> = grid
        .r()
        .iter()
        .zip(s)
        .map(|(&r, &s)| params.mu.eval(r) * sup.ws(s).powf(p))
        .collect();
    let mut cumulative = vec![0.0; s.len()];
    for j in 1..s.len() {
        cumulative[j] =
            cumulative[j - 1] + 0.5 * (s[j] - s[j - 1]) * (integrand[j] + integrand[j - 1]);
    }
    let mut full_min = f64::INFINITY;
    let masses: &[f64] = if m_series.is_empty() {
        &[0.0]
    } else {
        m_series
    };
    for &m in masses {
        let md = m / params.omega_area();
        for (j, &s) in s.iter().enumerate() {
            let op = 4.0 * s * sup.wss(s) + 2.0 * sup.eval(s) * sup.ws(s)
                - md * s * sup.ws(s)
                - scale * cumulative[j];
            full_min = full_min.min(-op);
        }
    }
    SupersolutionResidual {
        identity,
        identity_min: lower,
        full_min,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionResidual {
    /// Pass iff `a <= 4`.
    pub identity: MonitorReport,
    /// Minimum over nodes of `(8 - 2a) a b s / (b + s)^3`.
    pub identity_min: f64,
    /// Minimum over nodes and masses of `-(w-operator applied to wbar)`.
    pub full_min: f64,
}

/// `w_j <= a s_j / (b + s_j) + 1e-6 a` at every node.
pub fn check_supersolution_ordering(
    w: &FieldW,
    sup: &Supersolution,
    t: f64,
    grid: &RadialGrid,
) -> Result<MonitorReport> {
    w.check_grid(grid)?;
    let slack = ORDERING_SLACK * sup.a;
    Ok(MonitorReport::pointwise(
        "supersolution_ordering",
        t,
        grid.s()
            .iter()
            .zip(w.values())
            .enumerate()
            .map(|(j, (&s, &w))| (j, w, sup.eval(s), slack)),
    ))
}
