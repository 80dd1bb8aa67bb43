//! Model parameters and the structural hypotheses on the coefficients.
//!
//! The system lives on the disk of radius `R`. The logistic source is
//! `kappa(r) u - mu(r) u^p`. Coefficients are radial black boxes drawn from a
//! small catalog (or user closures in library use) and the hypotheses of the
//! blow-up and global-existence results are verified by dense sampling.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used by the sampled hypothesis checks.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

/// Default number of sample points for hypothesis checks and `kappa1`.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Relative step (in units of `R`) for central-difference derivatives.
const FD_STEP: f64 = 1e-6;

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial coefficient function `r -> value`.
#[derive(Clone)]
pub enum CoefficientFn {
    /// `c`
    Const(f64),
    /// `c * r^q`
    Power { c: f64, q: f64 },
    /// `a + b * r`
    Affine { a: f64, b: f64 },
    /// Arbitrary closure; the derivative falls back to central differences
    /// when not supplied.
    Custom {
        label: String,
        value: RadialFn,
        derivative: Option<RadialFn>,
    },
}

/// Where a derivative value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    CentralDifference,
}

impl CoefficientFn {
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CoefficientFn::Custom {
            label: label.into(),
            value: Arc::new(f),
            derivative: None,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            CoefficientFn::Const(c) => *c,
            CoefficientFn::Power { c, q } => c * r.powf(*q),
            CoefficientFn::Affine { a, b } => a + b * r,
            CoefficientFn::Custom { value, .. } => value(r),
        }
    }

    /// Derivative at `r`, together with how it was obtained. `radius` sets the
    /// finite-difference step and keeps the stencil inside `[0, R]`.
    pub fn derivative(&self, r: f64, radius: f64) -> (f64, DerivativeSource) {
        match self {
            CoefficientFn::Const(_) => (0.0, DerivativeSource::Analytic),
            CoefficientFn::Power { c, q } => {
                let d = if *q == 0.0 {
                    0.0
                } else {
                    c * q * r.powf(q - 1.0)
                };
                (d, DerivativeSource::Analytic)
            }
            CoefficientFn::Affine { b, .. } => (*b, DerivativeSource::Analytic),
            CoefficientFn::Custom {
                derivative: Some(d),
                ..
            } => (d(r), DerivativeSource::Analytic),
            CoefficientFn::Custom { value, .. } => {
                let h = FD_STEP * radius;
                let lo = (r - h).max(0.0);
                let hi = (r + h).min(radius);
                (
                    (value(hi) - value(lo)) / (hi - lo),
                    DerivativeSource::CentralDifference,
                )
            }
        }
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        match self {
            CoefficientFn::Custom {
                derivative: None, ..
            } => DerivativeSource::CentralDifference,
            _ => DerivativeSource::Analytic,
        }
    }

    /// `true` when the function is identically zero by construction.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            CoefficientFn::Const(c) => *c == 0.0,
            CoefficientFn::Power { c, .. } => *c == 0.0,
            CoefficientFn::Affine { a, b } => *a == 0.0 && *b == 0.0,
            CoefficientFn::Custom { .. } => false,
        }
    }
}

impl fmt::Debug for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientFn::Const(c) => write!(f, "const({c})"),
            CoefficientFn::Power { c, q } => write!(f, "power({c}, {q})"),
            CoefficientFn::Affine { a, b } => write!(f, "affine({a}, {b})"),
            CoefficientFn::Custom { label, .. } => write!(f, "custom({label})"),
        }
    }
}

/// Catalog entry as it appears in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    Const,
    Power,
    Affine,
}

/// `{ kind = "power", params = [1.0, 2.0] }`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub kind: CoefficientKind,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl CoefficientSpec {
    pub fn constant(c: f64) -> Self {
        CoefficientSpec {
            kind: CoefficientKind::Const,
            params: vec![c],
        }
    }

    pub fn power(c: f64, q: f64) -> Self {
        CoefficientSpec {
            kind: CoefficientKind::Power,
            params: vec![c, q],
        }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        CoefficientSpec {
            kind: CoefficientKind::Affine,
            params: vec![a, b],
        }
    }

    pub fn build(&self) -> Result<CoefficientFn> {
        let want = match self.kind {
            CoefficientKind::Const => 1,
            CoefficientKind::Power | CoefficientKind::Affine => 2,
        };
        if self.params.len() != want {
            return Err(Error::Config(format!(
                "coefficient {:?} takes {want} parameter(s), got {}",
                self.kind,
                self.params.len()
            )));
        }
        if self.params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!(
                "coefficient {:?} has non-finite parameters",
                self.kind
            )));
        }
        let p = &self.params;
        Ok(match self.kind {
            CoefficientKind::Const => CoefficientFn::Const(p[0]),
            CoefficientKind::Power => CoefficientFn::Power { c: p[0], q: p[1] },
            CoefficientKind::Affine => CoefficientFn::Affine { a: p[0], b: p[1] },
        })
    }
}

/// Immutable parameter set for one model instance.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub radius: f64,
    pub p: f64,
    pub alpha: f64,
    pub mu1: f64,
    pub kappa: CoefficientFn,
    pub mu: CoefficientFn,
    kappa1: f64,
    omega_area: f64,
}

impl ModelParams {
    pub fn new(
        radius: f64,
        p: f64,
        alpha: f64,
        mu1: f64,
        kappa: CoefficientFn,
        mu: CoefficientFn,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("p must be >= 1, got {p}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(mu1 > 0.0 && mu1.is_finite()) {
            return Err(Error::Config(format!("mu1 must be positive, got {mu1}")));
        }
        let mut kappa1 = f64::NEG_INFINITY;
        for r in sample_points(radius, DEFAULT_SAMPLES) {
            let k = kappa.eval(r);
            let m = mu.eval(r);
            if !k.is_finite() {
                return Err(Error::Config(format!(
                    "kappa is not evaluable at r = {r:e}"
                )));
            }
            if !m.is_finite() {
                return Err(Error::Config(format!("mu is not evaluable at r = {r:e}")));
            }
            kappa1 = kappa1.max(k);
        }
        Ok(ModelParams {
            radius,
            p,
            alpha,
            mu1,
            kappa,
            mu,
            kappa1,
            omega_area: std::f64::consts::PI * radius * radius,
        })
    }

    /// Sampled supremum of `kappa` on `[0, R]`.
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    /// `|Omega| = pi R^2`.
    pub fn omega_area(&self) -> f64 {
        self.omega_area
    }

    pub fn kappa_is_zero(&self) -> bool {
        self.kappa.is_identically_zero()
    }
}

/// `n` equispaced points covering `[0, R]` including both ends.
fn sample_points(radius: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| radius * i as f64 / (n - 1) as f64)
}

/// A failed hypothesis, reported at its worst sampled location.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    /// Radius where the violation is largest; `None` for scalar conditions.
    pub r: Option<f64>,
    /// Amount by which the condition fails.
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.r {
            Some(r) => write!(
                f,
                "{} fails at r = {:.6e} (excess {:.3e})",
                self.condition, r, self.excess
            ),
            None => write!(f, "{} fails (excess {:.3e})", self.condition, self.excess),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub kappa_derivative: DerivativeSource,
    pub mu_derivative: DerivativeSource,
    pub samples: usize,
}

/// Tracks the worst sampled excess of one pointwise condition.
struct Worst {
    condition: &'static str,
    worst: Option<(f64, f64)>,
}

impl Worst {
    fn new(condition: &'static str) -> Self {
        Worst {
            condition,
            worst: None,
        }
    }

    fn record(&mut self, r: f64, excess: f64) {
        if excess > HYPOTHESIS_TOL && self.worst.is_none_or(|(_, e)| excess > e) {
            self.worst = Some((r, excess));
        }
    }

    fn into_violation(self) -> Option<Violation> {
        self.worst.map(|(r, excess)| Violation {
            condition: self.condition.to_string(),
            r: Some(r),
            excess,
        })
    }
}

fn check_finite(name: &str, r: f64, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} is not evaluable at r = {r:e}"
        )))
    }
}

fn finish(
    params: &ModelParams,
    samples: usize,
    checks: Vec<Worst>,
    mut scalar: Vec<Violation>,
) -> HypothesisReport {
    let mut violations: Vec<Violation> = checks
        .into_iter()
        .filter_map(Worst::into_violation)
        .collect();
    violations.append(&mut scalar);
    HypothesisReport {
        pass: violations.is_empty(),
        violations,
        kappa_derivative: params.kappa.derivative_source(),
        mu_derivative: params.mu.derivative_source(),
        samples,
    }
}

/// Hypotheses of the finite-time blow-up result: `kappa, -kappa', mu, mu' >= 0`,
/// `mu(r) <= mu1 r^alpha` and `alpha >= 2(p - 1)`.
pub fn check_blowup_hypotheses(params: &ModelParams, samples: usize) -> Result<HypothesisReport> {
    if samples < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let radius = params.radius;
    let mut kappa_nonneg = Worst::new("kappa >= 0");
    let mut kappa_nonincreasing = Worst::new("-kappa' >= 0");
    let mut mu_nonneg = Worst::new("mu >= 0");
    let mut mu_nondecreasing = Worst::new("mu' >= 0");
    let mut mu_upper = Worst::new("mu(r) <= mu1 r^alpha");

    for r in sample_points(radius, samples) {
        let k = params.kappa.eval(r);
        let m = params.mu.eval(r);
        check_finite("kappa", r, k)?;
        check_finite("mu", r, m)?;
        kappa_nonneg.record(r, -k);
        mu_nonneg.record(r, -m);
        mu_upper.record(r, m - params.mu1 * r.powf(params.alpha));
        if r > 0.0 && r < radius {
            let (dk, _) = params.kappa.derivative(r, radius);
            let (dm, _) = params.mu.derivative(r, radius);
            check_finite("kappa'", r, dk)?;
            check_finite("mu'", r, dm)?;
            kappa_nonincreasing.record(r, dk);
            mu_nondecreasing.record(r, -dm);
        }
    }

    let mut scalar = Vec::new();
    let need = 2.0 * (params.p - 1.0);
    if params.alpha < need {
        scalar.push(Violation {
            condition: "alpha >= 2(p - 1)".to_string(),
            r: None,
            excess: need - params.alpha,
        });
    }
    Ok(finish(
        params,
        samples,
        vec![
            kappa_nonneg,
            kappa_nonincreasing,
            mu_nonneg,
            mu_nondecreasing,
            mu_upper,
        ],
        scalar,
    ))
}

/// Hypotheses of the global-existence result: `p > 2`, `alpha < p - 2` and
/// `mu(r) >= mu1 r^alpha`.
pub fn check_global_hypotheses(params: &ModelParams, samples: usize) -> Result<HypothesisReport> {
    if samples < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let mut mu_lower = Worst::new("mu(r) >= mu1 r^alpha");
    for r in sample_points(params.radius, samples) {
        let m = params.mu.eval(r);
        check_finite("mu", r, m)?;
        mu_lower.record(r, params.mu1 * r.powf(params.alpha) - m);
    }
    let mut scalar = Vec::new();
    if params.p <= 2.0 {
        scalar.push(Violation {
            condition: "p > 2".to_string(),
            r: None,
            excess: 2.0 - params.p,
        });
    }
    if params.alpha >= params.p - 2.0 {
        scalar.push(Violation {
            condition: "alpha < p - 2".to_string(),
            r: None,
            excess: params.alpha - (params.p - 2.0),
        });
    }
    Ok(finish(params, samples, vec![mu_lower], scalar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, alpha: f64, kappa: CoefficientFn, mu: CoefficientFn) -> ModelParams {
        ModelParams::new(1.0, p, alpha, 1.0, kappa, mu).unwrap()
    }

    #[test]
    fn remark_example_passes() {
        let m = params(
            2.0,
            2.0,
            CoefficientFn::Const(0.5),
            CoefficientFn::Power { c: 1.0, q: 2.0 },
        );
        let rep = check_blowup_hypotheses(&m, DEFAULT_SAMPLES).unwrap();
        assert!(rep.pass, "{:?}", rep.violations);
        assert_eq!(rep.kappa_derivative, DerivativeSource::Analytic);
    }

    #[test]
    fn increasing_kappa_fails() {
        let m = params(
            2.0,
            2.0,
            CoefficientFn::Affine { a: 0.0, b: 1.0 },
            CoefficientFn::Power { c: 1.0, q: 2.0 },
        );
        let rep = check_blowup_hypotheses(&m, 100).unwrap();
        assert!(!rep.pass);
        assert!(rep.violations.iter().any(|v| v.condition == "-kappa' >= 0"));
    }

    #[test]
    fn constant_mu_violates_power_bound_near_origin() {
        let m = params(
            2.0,
            2.0,
            CoefficientFn::Const(0.0),
            CoefficientFn::Const(1.0),
        );
        let rep = check_blowup_hypotheses(&m, 100).unwrap();
        let v = rep
            .violations
            .iter()
            .find(|v| v.condition == "mu(r) <= mu1 r^alpha")
            .expect("power bound violation");
        assert_eq!(v.r, Some(0.0));
        assert!((v.excess - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_too_small_is_scalar_violation() {
        let m = params(
            3.0,
            2.0,
            CoefficientFn::Const(0.0),
            CoefficientFn::Power { c: 1.0, q: 4.0 },
        );
        let rep = check_blowup_hypotheses(&m, 100).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == "alpha >= 2(p - 1)" && v.r.is_none()));
    }

    #[test]
    fn global_hypotheses() {
        // (1 + r) - sqrt(r) has minimum 3/4 at r = 1/4, so the bound holds on [0, 4].
        let m = ModelParams::new(
            4.0,
            3.0,
            0.5,
            1.0,
            CoefficientFn::Const(0.0),
            CoefficientFn::Affine { a: 1.0, b: 1.0 },
        )
        .unwrap();
        assert!(check_global_hypotheses(&m, DEFAULT_SAMPLES).unwrap().pass);

        let m = params(
            2.0,
            0.0,
            CoefficientFn::Const(0.0),
            CoefficientFn::Const(1.0),
        );
        let rep = check_global_hypotheses(&m, 100).unwrap();
        assert!(rep.violations.iter().any(|v| v.condition == "p > 2"));

        let m = params(
            3.0,
            1.5,
            CoefficientFn::Const(0.0),
            CoefficientFn::Const(1.0),
        );
        let rep = check_global_hypotheses(&m, 100).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.condition == "alpha < p - 2"));
    }

    #[test]
    fn custom_coefficient_uses_central_differences() {
        let mu = CoefficientFn::custom("r^2", |r| r * r);
        let (d, src) = mu.derivative(0.5, 1.0);
        assert_eq!(src, DerivativeSource::CentralDifference);
        assert!((d - 1.0).abs() < 1e-8);
        let m = params(2.0, 2.0, CoefficientFn::Const(0.0), mu);
        let rep = check_blowup_hypotheses(&m, 1000).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.mu_derivative, DerivativeSource::CentralDifference);
    }

    #[test]
    fn non_evaluable_coefficient_is_config_error() {
        let bad = CoefficientFn::custom("log", |r: f64| r.ln());
        let err = ModelParams::new(1.0, 2.0, 2.0, 1.0, bad, CoefficientFn::Const(0.0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn derived_constants() {
        let m = params(
            2.0,
            2.0,
            CoefficientFn::Affine { a: 2.0, b: -1.0 },
            CoefficientFn::Const(0.0),
        );
        assert!((m.kappa1() - 2.0).abs() < 1e-12);
        assert_eq!(m.omega_area(), std::f64::consts::PI);
        assert!(check_blowup_hypotheses(&m, 10).is_ok());
        assert!(check_blowup_hypotheses(&m, 1).is_err());
    }

    #[test]
    fn spec_rejects_wrong_arity() {
        let spec = CoefficientSpec {
            kind: CoefficientKind::Power,
            params: vec![1.0],
        };
        assert!(spec.build().is_err());
        assert!(CoefficientSpec::affine(1.0, 2.0).build().is_ok());
    }
}
