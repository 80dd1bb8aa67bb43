//! TOML experiment configuration with sections `model`, `grid`, `init`,
//! `run`, `certificate` and `sweep`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificate::SearchConfig;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::harness::detect::DetectionPolicy;
use crate::model::{CoefficientSpec, ModelParams};
use crate::stepping::{SolverKind, StepperConfig};

/// Smallest grid accepted for experiments.
pub const MIN_EXPERIMENT_CELLS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "R")]
    pub radius: f64,
    pub p: f64,
    pub alpha: f64,
    pub mu1: f64,
    pub kappa: CoefficientSpec,
    pub mu: CoefficientSpec,
}

impl ModelSection {
    /// `kappa = 0`, `mu = r^2`, `p = alpha = 2` on the unit disk.
    pub fn dichotomy() -> Self {
        ModelSection {
            radius: 1.0,
            p: 2.0,
            alpha: 2.0,
            mu1: 1.0,
            kappa: CoefficientSpec::constant(0.0),
            mu: CoefficientSpec::power(1.0, 2.0),
        }
    }

    pub fn build(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.radius,
            self.p,
            self.alpha,
            self.mu1,
            self.kappa.build()?,
            self.mu.build()?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitProfile {
    PlateauTail,
    CosineCap,
    Constant,
    /// Plateau bump meeting the certificate for `m0`; without a certificate
    /// falls back to a cosine cap with `r1` and `m_tilde_fraction`.
    Certified,
    /// Non-monotone `1 + amplitude exp(-((r - center) / width)^2)`, scaled to `m0`.
    Ring,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for RingSection {
    fn default() -> Self {
        RingSection {
            center: 0.6,
            width: 0.1,
            amplitude: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub profile: InitProfile,
    pub m0_over_8pi: f64,
    /// Concentration radius as a fraction of `R`.
    #[serde(default = "default_r1")]
    pub r1: f64,
    #[serde(default = "default_fraction")]
    pub m_tilde_fraction: f64,
    #[serde(default)]
    pub ring: RingSection,
}

fn default_r1() -> f64 {
    0.5
}

fn default_fraction() -> f64 {
    0.5
}

impl InitSection {
    pub fn m0(&self) -> f64 {
        self.m0_over_8pi * 8.0 * PI
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Primitive,
    Mass,
    Both,
}

impl SolverChoice {
    pub fn kinds(self) -> Vec<SolverKind> {
        match self {
            SolverChoice::Primitive => vec![SolverKind::Primitive],
            SolverChoice::Mass => vec![SolverKind::Mass],
            SolverChoice::Both => vec![SolverKind::Primitive, SolverKind::Mass],
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primitive" => Ok(SolverChoice::Primitive),
            "mass" => Ok(SolverChoice::Mass),
            "both" => Ok(SolverChoice::Both),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub solver: SolverChoice,
    pub t_end: f64,
    /// Snapshot spacing in time; `0` keeps only step-triggered snapshots.
    pub output_interval: f64,
    pub output_every_steps: usize,
    pub dt_min: f64,
    pub detection: DetectionPolicy,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            solver: SolverChoice::Primitive,
            t_end: 1.0,
            output_interval: 0.1,
            output_every_steps: 0,
            dt_min: 1e-12,
            detection: DetectionPolicy::default(),
            out_dir: None,
        }
    }
}

impl RunSection {
    pub fn stepper(&self) -> StepperConfig {
        let mut cfg = StepperConfig::for_horizon(self.t_end);
        cfg.output_interval = self.output_interval;
        cfg.output_every_steps = self.output_every_steps;
        cfg.dt_min = self.dt_min;
        cfg.detection = self.detection;
        cfg
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub m0_over_8pi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSpec,
    pub init: InitSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub certificate: SearchConfig,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks that need no computation.
    ///
    /// `t_end = 0` is accepted and yields a single-snapshot run.
    pub fn validate(&self) -> Result<()> {
        if self.grid.n_cells() < MIN_EXPERIMENT_CELLS {
            return Err(Error::Config(format!(
                "experiments need at least {MIN_EXPERIMENT_CELLS} cells, got {}",
                self.grid.n_cells()
            )));
        }
        if !(self.init.m0_over_8pi > 0.0 && self.init.m0_over_8pi.is_finite()) {
            return Err(Error::Config("init.m0_over_8pi must be positive".into()));
        }
        if !(self.init.r1 > 0.0 && self.init.r1 < 1.0) {
            return Err(Error::Config(
                "init.r1 must lie in (0, 1), in units of R".into(),
            ));
        }
        if !(self.init.m_tilde_fraction >= 0.0 && self.init.m_tilde_fraction < 1.0) {
            return Err(Error::Config(
                "init.m_tilde_fraction must lie in [0, 1)".into(),
            ));
        }
        if self
            .sweep
            .m0_over_8pi
            .iter()
            .any(|x| !(*x > 0.0 && x.is_finite()))
        {
            return Err(Error::Config(
                "sweep.m0_over_8pi entries must be positive".into(),
            ));
        }
        self.run.stepper().validate()
    }

    /// Dichotomy model on a uniform 1024-cell grid with a cosine cap of
    /// mass `m0_over_8pi * 8 pi`.
    pub fn dichotomy(m0_over_8pi: f64) -> Self {
        ExperimentConfig {
            model: ModelSection::dichotomy(),
            grid: GridSpec::Uniform { n: 1024 },
            init: InitSection {
                profile: InitProfile::CosineCap,
                m0_over_8pi,
                r1: default_r1(),
                m_tilde_fraction: default_fraction(),
                ring: RingSection::default(),
            },
            run: RunSection::default(),
            certificate: SearchConfig::default(),
            sweep: SweepSection::default(),
        }
    }

    /// Copy with `m0 = factor * 8 pi`.
    pub fn with_mass(&self, m0_over_8pi: f64) -> Self {
        let mut c = self.clone();
        c.init.m0_over_8pi = m0_over_8pi;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[model]
R = 1.0
p = 2.0
alpha = 2.0
mu1 = 1.0
kappa = { kind = "const", params = [0.0] }
mu = { kind = "power", params = [1.0, 2.0] }

[grid]
kind = "uniform"
n = 256

[init]
profile = "cosine_cap"
m0_over_8pi = 0.9
r1 = 0.5
m_tilde_fraction = 0.6

[run]
solver = "both"
t_end = 2.0

[sweep]
m0_over_8pi = [0.5, 0.9]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.run.solver, SolverChoice::Both);
        assert_eq!(cfg.grid.n_cells(), 256);
        assert_eq!(cfg.certificate, SearchConfig::default());
        assert!((cfg.init.m0() - 0.9 * 8.0 * PI).abs() < 1e-15);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(cfg.model.build().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = SAMPLE.replace("n = 256", "n = 32");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&bad),
            Err(Error::Config(_))
        ));
        let bad = SAMPLE.replace("t_end = 2.0", "t_end = -1.0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("solver = \"both\"", "solver = \"spectral\"");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&bad),
            Err(Error::Parse(_))
        ));
        let bad = SAMPLE.replace("[sweep]", "[sweep]\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }
}
