//! CSV writers. Numbers are written as `{:.17e}`, missing values as `nan`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order of a trajectory series.
pub const SERIES_COLUMNS: [&str; 10] = [
    "t",
    "m",
    "linf_u",
    "phi",
    "phi_rhs_odi",
    "ws_bound_margin",
    "monotonicity_margin",
    "vrr_margin",
    "supersolution_margin",
    "dt",
];

/// One snapshot row; `None` marks a quantity not monitored in this run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub m: f64,
    pub linf_u: f64,
    pub phi: Option<f64>,
    pub phi_rhs_odi: Option<f64>,
    pub ws_bound_margin: Option<f64>,
    pub monotonicity_margin: Option<f64>,
    pub vrr_margin: Option<f64>,
    pub supersolution_margin: Option<f64>,
    pub dt: f64,
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.17e}")
    }
}

fn opt(x: Option<f64>) -> String {
    format_number(x.unwrap_or(f64::NAN))
}

impl SeriesRow {
    pub fn record(&self) -> [String; 10] {
        [
            format_number(self.t),
            format_number(self.m),
            format_number(self.linf_u),
            opt(self.phi),
            opt(self.phi_rhs_odi),
            opt(self.ws_bound_margin),
            opt(self.monotonicity_margin),
            opt(self.vrr_margin),
            opt(self.supersolution_margin),
            format_number(self.dt),
        ]
    }
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SERIES_COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// `(t, max|u_primitive - u_mass| / max|u_primitive|)`.
pub fn write_discrepancy(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "linf_rel_discrepancy"])?;
    for (t, d) in rows {
        w.write_record([format_number(*t), format_number(*d)])?;
    }
    w.flush()?;
    Ok(())
}

/// Write any table given as header plus already formatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
