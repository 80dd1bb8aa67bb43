//! Numerical proxy for `limsup ||u||_inf = infinity`: amplitude threshold or
//! time-step collapse with a still-growing maximum.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionPolicy {
    /// Detect once `||u||_inf >= amplitude_factor * max(1, ||u0||_inf)`.
    pub amplitude_factor: f64,
    /// Number of consecutive accepted steps at `dt_min` with growing maximum.
    pub collapse_window: usize,
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        DetectionPolicy {
            amplitude_factor: 1e6,
            collapse_window: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionReason {
    Amplitude,
    StepCollapse,
    /// The step controller could not find an admissible `dt >= dt_min`.
    StepUnderflow,
}

impl std::fmt::Display for DetectionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectionReason::Amplitude => "amplitude",
            DetectionReason::StepCollapse => "step_collapse",
            DetectionReason::StepUnderflow => "step_underflow",
        })
    }
}

/// Rolling record of accepted steps.
#[derive(Clone, Debug)]
pub struct StepHistory {
    linf0: f64,
    dt_min: f64,
    recent: VecDeque<(f64, f64)>,
    capacity: usize,
}

impl StepHistory {
    pub fn new(linf0: f64, dt_min: f64, policy: &DetectionPolicy) -> Self {
        let capacity = policy.collapse_window + 1;
        StepHistory {
            linf0,
            dt_min,
            recent: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn linf0(&self) -> f64 {
        self.linf0
    }

    /// Record an accepted step of size `dt` ending with maximum `linf`.
    pub fn push(&mut self, dt: f64, linf: f64) {
        if self.recent.len() == self.capacity {
            self.recent.pop_front();
        }
        self.recent.push_back((dt, linf));
    }

    pub fn latest_linf(&self) -> f64 {
        self.recent.back().map_or(self.linf0, |x| x.1)
    }
}

/// `Some(reason)` once the trajectory is classified as blowing up.
pub fn detect_blowup(history: &StepHistory, policy: &DetectionPolicy) -> Option<DetectionReason> {
    if history.latest_linf() >= policy.amplitude_factor * history.linf0.max(1.0) {
        return Some(DetectionReason::Amplitude);
    }
    let k = policy.collapse_window;
    if k > 0 && history.recent.len() > k {
        let at_floor = history
            .recent
            .iter()
            .skip(1)
            .all(|(dt, _)| *dt <= history.dt_min * (1.0 + 1e-9));
        let growing = history
            .recent
            .iter()
            .zip(history.recent.iter().skip(1))
            .all(|(a, b)| b.1 > a.1);
        if at_floor && growing {
            return Some(DetectionReason::StepCollapse);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_state_never_detected() {
        let policy = DetectionPolicy::default();
        let mut h = StepHistory::new(2.0, 1e-12, &policy);
        for k in 0..100 {
            h.push(1e-12, 2.0 * (-(k as f64) * 0.01).exp());
            assert_eq!(detect_blowup(&h, &policy), None);
        }
    }

    #[test]
    fn amplitude_threshold() {
        let policy = DetectionPolicy::default();
        let mut h = StepHistory::new(3.0, 1e-12, &policy);
        h.push(1e-3, 3e7);
        assert_eq!(detect_blowup(&h, &policy), Some(DetectionReason::Amplitude));
        // threshold uses max(1, linf0)
        let mut h = StepHistory::new(1e-3, 1e-12, &policy);
        h.push(1e-3, 9e5);
        assert_eq!(detect_blowup(&h, &policy), None);
    }

    #[test]
    fn collapse_needs_full_growing_window() {
        let policy = DetectionPolicy::default();
        let mut h = StepHistory::new(1.0, 1e-12, &policy);
        h.push(1e-6, 10.0);
        for k in 0..9 {
            h.push(1e-12, 11.0 + k as f64);
            assert_eq!(detect_blowup(&h, &policy), None);
        }
        h.push(1e-12, 30.0);
        assert_eq!(
            detect_blowup(&h, &policy),
            Some(DetectionReason::StepCollapse)
        );
        h.push(1e-12, 29.0);
        assert_eq!(detect_blowup(&h, &policy), None);
    }
}
