//! Mass sweeps run in parallel, one experiment per `m0`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::run_experiment;
use crate::harness::output::{format_number, write_table};

/// Environment variable holding the worker count.
pub const THREADS_VAR: &str = "KSLAB_THREADS";

pub const SUMMARY_COLUMNS: [&str; 7] = [
    "m0_over_8pi",
    "solver",
    "outcome",
    "t_final",
    "peak_linf",
    "monitor_failures",
    "message",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub m0_over_8pi: f64,
    pub solver: String,
    pub outcome: String,
    pub t_final: f64,
    pub peak_linf: f64,
    pub monitor_failures: usize,
    pub message: String,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        vec![
            format_number(self.m0_over_8pi),
            self.solver.clone(),
            self.outcome.clone(),
            format_number(self.t_final),
            format_number(self.peak_linf),
            self.monitor_failures.to_string(),
            self.message.clone(),
        ]
    }
}

/// Worker count from `KSLAB_THREADS`, or `None` for the rayon default.
pub fn configured_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_VAR} = {v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn run_one(base: &ExperimentConfig, m0_over_8pi: f64) -> Vec<SweepRow> {
    let mut cfg = base.with_mass(m0_over_8pi);
    if let Some(dir) = &base.run.out_dir {
        cfg.run.out_dir = Some(dir.join(format!("m0_{m0_over_8pi:.6}")));
    }
    let failed = |message: String| SweepRow {
        m0_over_8pi,
        solver: "-".into(),
        outcome: "error".into(),
        t_final: f64::NAN,
        peak_linf: f64::NAN,
        monitor_failures: 0,
        message,
    };
    match run_experiment(&cfg) {
        Ok(report) => report
            .runs
            .iter()
            .map(|r| SweepRow {
                m0_over_8pi,
                solver: r.solver.to_string(),
                outcome: r.outcome.label().to_string(),
                t_final: r.t_final,
                peak_linf: r.peak_linf,
                monitor_failures: r.monitors.tallies.iter().map(|t| t.failures).sum(),
                message: report.notes.join("; "),
            })
            .collect(),
        Err(e) => vec![failed(e.to_string())],
    }
}

/// Run `base` once per mass. A failing run becomes an `error` row and does
/// not stop the others. Rows keep the order of `masses`.
pub fn sweep_mass(base: &ExperimentConfig, masses: &[f64]) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = configured_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        masses
            .par_iter()
            .map(|&m| run_one(base, m))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    if let Some(dir) = &base.run.out_dir {
        write_summary(dir, &rows)?;
    }
    Ok(rows)
}

fn write_summary(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let records: Vec<Vec<String>> = rows.iter().map(SweepRow::record).collect();
    write_table(&dir.join("summary.csv"), &SUMMARY_COLUMNS, &records)?;
    let mut index = String::new();
    for row in rows {
        index.push_str(&format!(
            "m0_{:.6}/  {}  {}\n",
            row.m0_over_8pi, row.solver, row.outcome
        ));
    }
    std::fs::write(dir.join("index.txt"), index)?;
    Ok(())
}
