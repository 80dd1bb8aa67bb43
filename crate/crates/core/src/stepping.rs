//! Adaptive time-step driver shared by both solvers: step-size control,
//! output scheduling, snapshot emission and blow-up classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW};
use crate::harness::detect::{detect_blowup, DetectionPolicy, DetectionReason, StepHistory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Finite volumes for the density `u`.
    Primitive,
    /// Finite differences for the cumulative mass `w`.
    Mass,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Primitive => "primitive",
            SolverKind::Mass => "mass",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Limits applied to a single attempted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLimits {
    pub dt_min: f64,
    /// Reject when `||u||_inf` grows by more than this fraction.
    pub max_growth: f64,
    /// Reject when clipped negative mass exceeds this fraction of `m_ref`.
    pub clip_fraction: f64,
    pub m_ref: f64,
}

impl StepLimits {
    pub fn new(dt_min: f64, m_ref: f64) -> Self {
        StepLimits {
            dt_min,
            max_growth: 0.5,
            clip_fraction: 1e-6,
            m_ref,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepError {
    /// No admissible step at or above `dt_min`; the blow-up signal.
    Underflow { dt: f64, reason: String },
    /// Non-finite data that halving cannot cure.
    Numerical(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub t_end: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_init: f64,
    /// Target for `max|u_new - u_old| / ||u_old||_inf` per step.
    pub target_change: f64,
    /// Safety factor on the explicit stability bounds.
    pub cfl: f64,
    /// Time between snapshots; `0` disables time-triggered output.
    pub output_interval: f64,
    /// Emit a snapshot every this many accepted steps; `0` disables.
    pub output_every_steps: usize,
    pub max_steps: usize,
    /// Keep one record per accepted step in the trajectory.
    pub record_steps: bool,
    pub detection: DetectionPolicy,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig::for_horizon(1.0)
    }
}

impl StepperConfig {
    /// Defaults scaled to the horizon `t_end`.
    pub fn for_horizon(t_end: f64) -> Self {
        let scale = if t_end > 0.0 { t_end } else { 1.0 };
        StepperConfig {
            t_end,
            dt_min: 1e-12,
            dt_max: 1e-2 * scale,
            dt_init: 1e-6 * scale,
            target_change: 0.1,
            cfl: 0.45,
            output_interval: 0.1 * scale,
            output_every_steps: 0,
            max_steps: 50_000_000,
            record_steps: true,
            detection: DetectionPolicy::default(),
        }
    }

    pub fn with_output_interval(mut self, dt: f64) -> Self {
        self.output_interval = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_init > 0.0) {
            return Err(Error::Config(
                "need 0 < dt_min <= dt_max and dt_init > 0".into(),
            ));
        }
        if !(self.target_change > 0.0 && self.cfl > 0.0 && self.output_interval >= 0.0) {
            return Err(Error::Config(
                "target_change, cfl must be > 0 and output_interval >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Initial,
    Time,
    Steps,
    Final,
}

/// Read-only view handed to observers.
#[derive(Clone, Copy, Debug)]
pub struct Snapshot<'a> {
    pub solver: SolverKind,
    pub trigger: Trigger,
    pub t: f64,
    /// Last accepted step size (`0` initially).
    pub dt: f64,
    pub step: usize,
    pub m: f64,
    pub u: &'a FieldU,
    pub w: &'a FieldW,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowupDetected { reason: DetectionReason },
    NumericalFailure { message: String },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowupDetected { .. } => "blowup_detected",
            Outcome::NumericalFailure { .. } => "numerical_failure",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::BlowupDetected { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub m: f64,
    pub linf: f64,
    pub clipped_mass: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub solver: SolverKind,
    pub outcome: Outcome,
    pub t_final: f64,
    pub linf0: f64,
    pub peak_linf: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_clipped_mass: f64,
    pub steps: Vec<StepRecord>,
    pub final_u: FieldU,
    pub final_w: FieldW,
}

/// State interface the driver needs from a solver.
pub(crate) trait Evolving: Sized {
    const KIND: SolverKind;
    fn time(&self) -> f64;
    fn mass(&self) -> f64;
    fn density(&self) -> &FieldU;
    fn cumulative(&self) -> &FieldW;
    fn clipped_mass(&self) -> f64 {
        0.0
    }
    fn step_count(&self) -> usize;
    /// Largest explicitly stable step, before the safety factor.
    fn stable_dt(&self) -> f64;
    /// Attempt one step of exactly `dt`, halving on rejection.
    fn advance(&self, dt: f64, limits: &StepLimits) -> std::result::Result<(Self, f64), StepError>;
    /// Overwrite the clock after landing on an output time.
    fn set_time(&mut self, t: f64);
}

fn relative_change(old: &FieldU, new: &FieldU) -> f64 {
    let scale = old.linf().max(1e-300);
    old.values()
        .iter()
        .zip(new.values())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
        / scale
}

fn emit<S: Evolving>(state: &S, trigger: Trigger, dt: f64, observer: &mut dyn FnMut(&Snapshot)) {
    observer(&Snapshot {
        solver: S::KIND,
        trigger,
        t: state.time(),
        dt,
        step: state.step_count(),
        m: state.mass(),
        u: state.density(),
        w: state.cumulative(),
    });
}

pub(crate) fn drive<S: Evolving>(
    initial: S,
    cfg: &StepperConfig,
    observer: &mut dyn FnMut(&Snapshot),
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = initial;
    let linf0 = state.density().linf();
    let limits = StepLimits::new(cfg.dt_min, state.mass().abs().max(1e-300));
    let mut history = StepHistory::new(linf0, cfg.dt_min, &cfg.detection);
    let mut steps = Vec::new();
    let mut rejected = 0usize;
    let mut max_clip = 0.0f64;
    let mut peak = linf0;
    let mut dt = cfg.dt_init.min(cfg.dt_max);
    let mut last_dt = 0.0;
    let mut outputs_done = 0usize;
    let t_end = cfg.t_end;
    let landing_tol = 1e-12 * t_end.max(1.0);

    emit(&state, Trigger::Initial, 0.0, observer);

    let next_output = |k: usize| -> f64 {
        if cfg.output_interval > 0.0 {
            ((k + 1) as f64 * cfg.output_interval).min(t_end)
        } else {
            t_end
        }
    };

    let outcome = loop {
        if t_end - state.time() <= landing_tol {
            break Outcome::Completed;
        }
        if state.step_count() >= cfg.max_steps {
            break Outcome::NumericalFailure {
                message: format!("step budget of {} exhausted", cfg.max_steps),
            };
        }
        let target = next_output(outputs_done);
        let mut trial = dt
            .min(cfg.dt_max)
            .min(cfg.cfl * state.stable_dt())
            .max(cfg.dt_min);
        let remaining = target - state.time();
        let landing = trial >= remaining - landing_tol;
        if landing {
            trial = remaining;
        }
        let (mut next, used) = match state.advance(trial, &limits) {
            Ok(x) => x,
            Err(StepError::Underflow { .. }) => {
                break Outcome::BlowupDetected {
                    reason: DetectionReason::StepUnderflow,
                }
            }
            Err(StepError::Numerical(message)) => break Outcome::NumericalFailure { message },
        };
        if used < trial {
            rejected += (trial / used).log2().round() as usize;
        }
        let landed = landing && used == trial;
        if landed {
            next.set_time(target);
        }
        let change = relative_change(state.density(), next.density());
        let linf = next.density().linf();
        if !linf.is_finite() {
            break Outcome::NumericalFailure {
                message: format!("non-finite maximum at t = {:e}", next.time()),
            };
        }
        peak = peak.max(linf);
        max_clip = max_clip.max(next.clipped_mass());
        history.push(used, linf);
        if cfg.record_steps {
            steps.push(StepRecord {
                t: next.time(),
                dt: used,
                m: next.mass(),
                linf,
                clipped_mass: next.clipped_mass(),
            });
        }
        state = next;
        last_dt = used;

        let factor = if change > 0.0 {
            (0.9 * cfg.target_change / change).clamp(0.2, 2.0)
        } else {
            2.0
        };
        // A landing step may be artificially short; grow from the unclipped proposal.
        let base = if landed { dt.max(used) } else { used };
        dt = (base * factor).clamp(cfg.dt_min, cfg.dt_max);

        if let Some(reason) = detect_blowup(&history, &cfg.detection) {
            break Outcome::BlowupDetected { reason };
        }
        if landed && t_end - state.time() > landing_tol {
            outputs_done += 1;
            emit(&state, Trigger::Time, last_dt, observer);
        } else if cfg.output_every_steps > 0
            && state.step_count().is_multiple_of(cfg.output_every_steps)
        {
            emit(&state, Trigger::Steps, last_dt, observer);
        }
    };
    emit(&state, Trigger::Final, last_dt, observer);

    Ok(Trajectory {
        solver: S::KIND,
        outcome,
        t_final: state.time(),
        linf0,
        peak_linf: peak,
        accepted_steps: state.step_count(),
        rejected_steps: rejected,
        max_clipped_mass: max_clip,
        steps,
        final_u: state.density().clone(),
        final_w: state.cumulative().clone(),
    })
}

/// Halve `dt` until `attempt` accepts, or signal underflow below `dt_min`.
pub(crate) fn with_halving<S>(
    dt: f64,
    dt_min: f64,
    mut attempt: impl FnMut(f64) -> std::result::Result<S, String>,
) -> std::result::Result<(S, f64), StepError> {
    let mut h = dt;
    loop {
        match attempt(h) {
            Ok(s) => return Ok((s, h)),
            Err(reason) => {
                h *= 0.5;
                // Landing steps may start below dt_min; allow one attempt there.
                if h < dt_min {
                    return Err(StepError::Underflow { dt: h, reason });
                }
            }
        }
    }
}
