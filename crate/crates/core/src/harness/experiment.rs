//! Single experiments: data preparation, solver runs with per-snapshot
//! monitoring, and result files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::certificate::{
    integral_estimates_check, moment_phi, select_blowup_parameters, verify_odi_along_trajectory,
    Certificate, IntegralReport, OdiReport, Selection,
};
use crate::elliptic::{compute_vrr, solve_vr};
use crate::error::{Error, Result};
use crate::grid::{FieldU, FieldW, RadialGrid};
use crate::harness::config::{ExperimentConfig, InitProfile, RingSection};
use crate::harness::output::{write_discrepancy, write_series, SeriesRow};
use crate::initdata::{build_initial_data, BumpSpec, Profile};
use crate::model::{
    check_blowup_hypotheses, check_global_hypotheses, HypothesisReport, ModelParams,
    DEFAULT_SAMPLES,
};
use crate::monitors::{
    check_mass_bound, check_radial_monotonicity, check_supersolution_ordering, check_vrr_bound,
    check_ws_bound, select_supersolution, MonitorReport, Supersolution,
};
use crate::stepping::{Outcome, Snapshot, SolverKind, Trigger};
use crate::transform::{forward_transform, mass_of_density, total_mass};
use crate::{stepper_u, stepper_w};

/// Failing reports kept verbatim per run; the rest are only counted.
const KEPT_FAILURES: usize = 64;
/// Fraction of the certified window on which the ODI is checked.
const ODI_WINDOW: f64 = 0.9;

/// `1 + amplitude exp(-((r - center) / width)^2)`, rescaled to mass `m0`.
pub fn ring_profile(m0: f64, ring: &RingSection, grid: &RadialGrid) -> Result<FieldU> {
    if !(ring.width > 0.0 && ring.amplitude >= 0.0) {
        return Err(Error::Config(
            "ring width must be positive and amplitude nonnegative".into(),
        ));
    }
    let shape = FieldU::from_fn(grid, |r| {
        let x = (r - ring.center * grid.radius()) / (ring.width * grid.radius());
        1.0 + ring.amplitude * (-x * x).exp()
    });
    let scale = m0 / mass_of_density(&shape, grid);
    Ok(FieldU::new(
        shape.values().iter().map(|x| x * scale).collect(),
    ))
}

/// Everything computed before time stepping starts.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub params: ModelParams,
    pub grid: RadialGrid,
    pub m0: f64,
    pub u0: FieldU,
    pub w0: FieldW,
    pub blowup_hypotheses: HypothesisReport,
    pub global_hypotheses: HypothesisReport,
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
    pub supersolution: Option<Supersolution>,
    /// Initial data are radially nonincreasing, so the monotone-data
    /// bounds apply.
    pub monotone_data: bool,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let params = cfg.model.build()?;
    let grid = cfg.grid.build(params.radius)?;
    let m0 = cfg.init.m0();
    let blowup_hypotheses = check_blowup_hypotheses(&params, DEFAULT_SAMPLES)?;
    let global_hypotheses = check_global_hypotheses(&params, DEFAULT_SAMPLES)?;
    let mut notes = Vec::new();

    let certificate = if m0 <= 8.0 * PI {
        None
    } else if !blowup_hypotheses.pass {
        notes.push("blow-up hypotheses fail; no certificate attempted".to_string());
        None
    } else {
        match select_blowup_parameters(m0, &params, &cfg.certificate)? {
            Selection::Found(c) => Some(*c),
            Selection::NotFound { reason } => {
                notes.push(format!("no certificate: {reason}"));
                None
            }
        }
    };

    let bump = |profile: Profile| BumpSpec {
        m0,
        r1: cfg.init.r1 * params.radius,
        m_tilde: cfg.init.m_tilde_fraction * m0,
        profile,
    };
    let u0 = match cfg.init.profile {
        InitProfile::PlateauTail => build_initial_data(&bump(Profile::PlateauTail), &grid)?,
        InitProfile::CosineCap => build_initial_data(&bump(Profile::CosineCap), &grid)?,
        InitProfile::Constant => build_initial_data(&bump(Profile::Constant), &grid)?,
        InitProfile::Certified => match &certificate {
            Some(c) => {
                build_initial_data(&BumpSpec::from_certificate(c, Profile::PlateauTail), &grid)?
            }
            None => {
                notes.push("certified profile without certificate; using cosine cap".to_string());
                build_initial_data(&bump(Profile::CosineCap), &grid)?
            }
        },
        InitProfile::Ring => ring_profile(m0, &cfg.init.ring, &grid)?,
    };
    let w0 = forward_transform(&u0, &grid)?;
    let monotone_data = u0.values().windows(2).all(|p| p[1] <= p[0]);

    let supersolution = if params.kappa_is_zero() && m0 < 8.0 * PI {
        match select_supersolution(m0, &w0, &grid) {
            Ok(s) => Some(s),
            Err(e) => {
                notes.push(format!("no supersolution: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(Prepared {
        params,
        grid,
        m0,
        u0,
        w0,
        blowup_hypotheses,
        global_hypotheses,
        certificate,
        notes,
        supersolution,
        monotone_data,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorTally {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    pub worst_margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub tallies: Vec<MonitorTally>,
    pub failures: Vec<MonitorReport>,
    pub dropped_failures: usize,
}

impl MonitorSummary {
    fn add(&mut self, rep: &MonitorReport) {
        let tally = match self.tallies.iter_mut().position(|t| t.name == rep.name) {
            Some(i) => &mut self.tallies[i],
            None => {
                self.tallies.push(MonitorTally {
                    name: rep.name.clone(),
                    checks: 0,
                    failures: 0,
                    worst_margin: f64::INFINITY,
                });
                self.tallies.last_mut().unwrap()
            }
        };
        tally.checks += 1;
        tally.worst_margin = tally.worst_margin.min(rep.margin);
        if !rep.pass {
            tally.failures += 1;
            if self.failures.len() < KEPT_FAILURES {
                self.failures.push(rep.clone());
            } else {
                self.dropped_failures += 1;
            }
        }
    }

    pub fn tally(&self, name: &str) -> Option<&MonitorTally> {
        self.tallies.iter().find(|t| t.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.tallies.iter().all(|t| t.failures == 0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub solver: SolverKind,
    pub outcome: Outcome,
    pub t_final: f64,
    pub t_end: f64,
    pub peak_linf: f64,
    pub m0: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_clipped_mass: f64,
    pub certificate: Option<Certificate>,
    pub monitors: MonitorSummary,
    pub odi: Option<OdiReport>,
    #[serde(skip)]
    pub estimates: Vec<IntegralReport>,
    pub estimate_failures: usize,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
    pub series_path: Option<PathBuf>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    /// `(t, relative L-infinity difference)` between the two solvers.
    pub discrepancy: Vec<(f64, f64)>,
    pub blowup_hypotheses: HypothesisReport,
    pub global_hypotheses: HypothesisReport,
    pub supersolution: Option<Supersolution>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn run(&self, solver: SolverKind) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.solver == solver)
    }
}

struct Recorder<'a> {
    prep: &'a Prepared,
    monitors: MonitorSummary,
    rows: Vec<SeriesRow>,
    phi: Vec<(f64, f64)>,
    estimates: Vec<IntegralReport>,
    timed: Vec<(f64, FieldU)>,
    keep_timed: bool,
    error: Option<Error>,
}

impl<'a> Recorder<'a> {
    fn new(prep: &'a Prepared, keep_timed: bool) -> Self {
        Recorder {
            prep,
            monitors: MonitorSummary::default(),
            rows: Vec::new(),
            phi: Vec::new(),
            estimates: Vec::new(),
            timed: Vec::new(),
            keep_timed,
            error: None,
        }
    }

    fn observe(&mut self, snap: &Snapshot) {
        if self.error.is_none() {
            if let Err(e) = self.try_observe(snap) {
                self.error = Some(e);
            }
        }
    }

    fn try_observe(&mut self, snap: &Snapshot) -> Result<()> {
        let prep = self.prep;
        let (grid, params) = (&prep.grid, &prep.params);
        let kappa1 = params.kappa1();
        let t = snap.t;
        let m = total_mass(snap.w);

        let mass = check_mass_bound(snap.m, t, prep.m0, kappa1);
        self.monitors.add(&mass);
        let vr = solve_vr(snap.w, m, params, grid)?;
        let vrr = compute_vrr(snap.u, &vr, m, params, grid)?;
        let vrr_rep = check_vrr_bound(snap.u, &vrr, t, grid)?;
        self.monitors.add(&vrr_rep);

        let (mut ws_margin, mut mono_margin) = (None, None);
        if prep.monotone_data {
            let ws = check_ws_bound(snap.w, t, prep.m0, kappa1, grid)?;
            self.monitors.add(&ws);
            ws_margin = Some(ws.margin);
            let mono = check_radial_monotonicity(snap.u, t);
            self.monitors.add(&mono);
            mono_margin = Some(mono.margin);
        }
        let sup_margin = match &prep.supersolution {
            Some(sup) => {
                let rep = check_supersolution_ordering(snap.w, sup, t, grid)?;
                self.monitors.add(&rep);
                Some(rep.margin)
            }
            None => None,
        };
        let (mut phi, mut phi_rhs) = (None, None);
        if let Some(cert) = &prep.certificate {
            let value = moment_phi(snap.w, &cert.moment(), grid)?;
            phi = Some(value);
            phi_rhs = Some(cert.coeffs.rhs(value));
            self.phi.push((t, value));
            if t < cert.t_tilde.min(1.0) {
                let rep = integral_estimates_check(
                    snap.w,
                    &cert.moment(),
                    params,
                    prep.m0,
                    cert.eta,
                    t,
                    grid,
                )?;
                self.estimates.push(rep);
            }
        }
        if self.keep_timed
            && matches!(
                snap.trigger,
                Trigger::Initial | Trigger::Time | Trigger::Final
            )
        {
            self.timed.push((t, snap.u.clone()));
        }
        self.rows.push(SeriesRow {
            t,
            m: snap.m,
            linf_u: snap.u.linf(),
            phi,
            phi_rhs_odi: phi_rhs,
            ws_bound_margin: ws_margin,
            monotonicity_margin: mono_margin,
            vrr_margin: Some(vrr_rep.margin),
            supersolution_margin: sup_margin,
            dt: snap.dt,
        });
        Ok(())
    }
}

fn discrepancy(a: &[(f64, FieldU)], b: &[(f64, FieldU)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (t, ua) in a {
        if let Some((_, ub)) = b.iter().find(|(s, _)| s == t) {
            let diff = ua
                .values()
                .iter()
                .zip(ub.values())
                .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
            out.push((*t, diff / ua.linf().max(f64::MIN_POSITIVE)));
        }
    }
    out
}

/// Run one solver on prepared data.
pub fn run_prepared(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    solver: SolverKind,
) -> Result<(RunResult, Vec<(f64, FieldU)>)> {
    let stepper = cfg.run.stepper();
    let keep_timed = cfg.run.solver == crate::harness::config::SolverChoice::Both;
    let mut rec = Recorder::new(prep, keep_timed);
    let traj = {
        let mut obs = |s: &Snapshot| rec.observe(s);
        match solver {
            SolverKind::Primitive => {
                stepper_u::run_u(&prep.u0, &prep.params, &prep.grid, &stepper, &mut obs)?
            }
            SolverKind::Mass => {
                stepper_w::run_w(&prep.w0, &prep.params, &prep.grid, &stepper, &mut obs)?
            }
        }
    };
    if let Some(e) = rec.error {
        return Err(e);
    }
    let odi = match &prep.certificate {
        Some(cert) => {
            let horizon = ODI_WINDOW * cert.t_tilde.min(traj.t_final);
            let window: Vec<(f64, f64)> = rec
                .phi
                .iter()
                .copied()
                .filter(|(t, _)| *t < horizon)
                .collect();
            if window.len() >= 3 {
                Some(verify_odi_along_trajectory(&window, &cert.coeffs)?)
            } else {
                None
            }
        }
        None => None,
    };
    let estimate_failures = rec.estimates.iter().filter(|r| !r.pass()).count();
    Ok((
        RunResult {
            solver,
            outcome: traj.outcome,
            t_final: traj.t_final,
            t_end: stepper.t_end,
            peak_linf: traj.peak_linf,
            m0: prep.m0,
            accepted_steps: traj.accepted_steps,
            rejected_steps: traj.rejected_steps,
            max_clipped_mass: traj.max_clipped_mass,
            certificate: prep.certificate.clone(),
            monitors: rec.monitors,
            odi,
            estimates: rec.estimates,
            estimate_failures,
            series: rec.rows,
            series_path: None,
            config: cfg.clone(),
        },
        rec.timed,
    ))
}

/// Prepare, run every configured solver, and write results when
/// `run.out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let prep = prepare(cfg)?;
    let mut runs = Vec::new();
    let mut timed = Vec::new();
    for solver in cfg.run.solver.kinds() {
        let (run, t) = run_prepared(&prep, cfg, solver)?;
        runs.push(run);
        timed.push(t);
    }
    let discrepancy = if timed.len() == 2 {
        discrepancy(&timed[0], &timed[1])
    } else {
        Vec::new()
    };
    let mut report = ExperimentReport {
        runs,
        discrepancy,
        blowup_hypotheses: prep.blowup_hypotheses.clone(),
        global_hypotheses: prep.global_hypotheses.clone(),
        supersolution: prep.supersolution,
        notes: prep.notes.clone(),
    };
    if let Some(dir) = &cfg.run.out_dir {
        write_report(dir, &mut report, &prep)?;
    }
    Ok(report)
}

fn write_report(dir: &Path, report: &mut ExperimentReport, prep: &Prepared) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for run in report.runs.iter_mut() {
        let path = dir.join(format!("series_{}.csv", run.solver));
        write_series(&path, &run.series)?;
        run.series_path = Some(path);
    }
    if !report.discrepancy.is_empty() {
        write_discrepancy(&dir.join("discrepancy.csv"), &report.discrepancy)?;
    }
    if let Some(cert) = &prep.certificate {
        std::fs::write(dir.join("certificate.txt"), cert.to_record(&prep.params))?;
    }
    std::fs::write(dir.join("result.toml"), toml::to_string(report)?)?;
    Ok(())
}

/// Text record of the certificate search for `m0`, or `none: reason`.
/// Refuses when the model violates the blow-up hypotheses.
pub fn certify(
    m0: f64,
    params: &ModelParams,
    search: &crate::certificate::SearchConfig,
) -> Result<String> {
    let hyp = check_blowup_hypotheses(params, DEFAULT_SAMPLES)?;
    if !hyp.pass {
        let list: Vec<String> = hyp.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Domain(format!(
            "blow-up hypotheses violated: {}",
            list.join("; ")
        )));
    }
    Ok(match select_blowup_parameters(m0, params, search)? {
        Selection::Found(c) => c.to_record(params),
        Selection::NotFound { reason } => format!("none: {reason}\n"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::SearchConfig;
    use crate::grid::GridSpec;
    use crate::harness::config::{
        InitSection, ModelSection, RunSection, SolverChoice, SweepSection,
    };

    fn small(profile: InitProfile, m0_over_8pi: f64) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSection::dichotomy(),
            grid: GridSpec::Uniform { n: 128 },
            init: InitSection {
                profile,
                m0_over_8pi,
                r1: 0.5,
                m_tilde_fraction: 0.5,
                ring: RingSection::default(),
            },
            run: RunSection {
                solver: SolverChoice::Both,
                t_end: 0.05,
                output_interval: 0.01,
                ..RunSection::default()
            },
            certificate: SearchConfig::default(),
            sweep: SweepSection::default(),
        }
    }

    #[test]
    fn subcritical_run_passes_monitors() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(InitProfile::CosineCap, 0.5);
        cfg.run.out_dir = Some(dir.path().to_path_buf());
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.runs.len(), 2);
        assert!(rep.supersolution.is_some());
        for run in &rep.runs {
            assert_eq!(run.outcome, Outcome::Completed);
            assert!(run.monitors.all_pass(), "{:?}", run.monitors.failures);
            assert!(run.monitors.tally("supersolution_ordering").is_some());
        }
        assert_eq!(rep.discrepancy.len(), 6);
        assert!(rep.discrepancy.iter().all(|(_, d)| *d < 1e-2));
        for name in [
            "series_primitive.csv",
            "series_mass.csv",
            "discrepancy.csv",
            "result.toml",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }

    #[test]
    fn ring_profile_has_mass_and_is_not_monotone() {
        let g = RadialGrid::uniform(1.0, 256).unwrap();
        let u = ring_profile(3.0, &RingSection::default(), &g).unwrap();
        assert!((mass_of_density(&u, &g) - 3.0).abs() < 1e-12);
        assert!(u.values().windows(2).any(|p| p[1] > p[0]));
        let bad = RingSection {
            width: 0.0,
            ..RingSection::default()
        };
        assert!(ring_profile(3.0, &bad, &g).is_err());
    }

    #[test]
    fn certify_refuses_and_reports() {
        let params = ModelSection::dichotomy().build().unwrap();
        let none = certify(4.0 * PI, &params, &SearchConfig::default()).unwrap();
        assert!(none.starts_with("none:"));
        let mut bad = ModelSection::dichotomy();
        bad.alpha = 1.0;
        let err = certify(10.0 * PI, &bad.build().unwrap(), &SearchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn identical_configs_give_identical_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut cfg = small(InitProfile::PlateauTail, 0.7);
        for dir in [&a, &b] {
            cfg.run.out_dir = Some(dir.path().to_path_buf());
            run_experiment(&cfg).unwrap();
        }
        for name in ["series_primitive.csv", "series_mass.csv", "discrepancy.csv"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }
}
