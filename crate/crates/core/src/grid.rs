//! Paired radial grids and the nodal fields living on them.
//!
//! Node `j` carries both a radius `r_j` and an area coordinate `s_j = r_j^2`,
//! so a field on the r-grid and its counterpart on the s-grid share indices.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    r: Vec<f64>,
    s: Vec<f64>,
    /// Trapezoid weights for `int_0^R rho f(rho) d rho`; `weights[0] = 0`.
    weights: Vec<f64>,
    /// Squared control-volume face radii `f_{j+1/2}^2 = 2 sum_{k<=j} weights[k]`,
    /// so the volume between consecutive faces equals the trapezoid weight.
    face_sq: Vec<f64>,
}

impl RadialGrid {
    /// Uniform spacing in `r`, hence quadratically graded in `s`.
    pub fn uniform(radius: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::Config(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        let mut r: Vec<f64> = (0..=n_cells)
            .map(|j| radius * j as f64 / n_cells as f64)
            .collect();
        r[n_cells] = radius;
        Self::from_nodes(r)
    }

    /// Geometrically growing spacing starting from `first_spacing` at the
    /// origin. Resolves concentration at scales far below `R / n_cells`.
    pub fn geometric(radius: f64, n_cells: usize, first_spacing: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::Config(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        if !(first_spacing > 0.0 && first_spacing * (n_cells as f64) < radius) {
            return Err(Error::Config(format!(
                "first spacing {first_spacing:e} must lie in (0, R / n_cells)"
            )));
        }
        let n = n_cells as i32;
        let total = |q: f64| first_spacing * (q.powi(n) - 1.0) / (q - 1.0);
        let (mut lo, mut hi) = (1.0 + 1e-15, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) > radius {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        let mut r = Vec::with_capacity(n_cells + 1);
        r.push(0.0);
        let mut h = first_spacing;
        for _ in 0..n_cells {
            let last = *r.last().unwrap();
            r.push(last + h);
            h *= q;
        }
        let scale = radius / r[n_cells];
        for x in r.iter_mut() {
            *x *= scale;
        }
        r[n_cells] = radius;
        Self::from_nodes(r)
    }

    /// Build from explicit radial nodes `0 = r_0 < ... < r_N = R`.
    pub fn from_nodes(r: Vec<f64>) -> Result<Self> {
        if r.len() < MIN_CELLS + 1 {
            return Err(Error::Config(format!(
                "need at least {} nodes, got {}",
                MIN_CELLS + 1,
                r.len()
            )));
        }
        if r[0] != 0.0 {
            return Err(Error::Config("first radial node must be 0".into()));
        }
        if r.iter().any(|x| !x.is_finite()) || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "radial nodes must be finite and strictly increasing".into(),
            ));
        }
        let s: Vec<f64> = r.iter().map(|x| x * x).collect();
        let n = r.len() - 1;
        let mut weights = vec![0.0; n + 1];
        for j in 0..n {
            let h = r[j + 1] - r[j];
            weights[j] += 0.5 * h * r[j];
            weights[j + 1] += 0.5 * h * r[j + 1];
        }
        let mut face_sq = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for w in &weights {
            acc += 2.0 * w;
            face_sq.push(acc);
        }
        face_sq[n] = s[n];
        Ok(RadialGrid {
            r,
            s,
            weights,
            face_sq,
        })
    }

    /// Squared radii of the control-volume faces `j + 1/2`, `j = 0..=N`.
    /// The first is `0` and the last is `R^2`.
    pub fn face_sq(&self) -> &[f64] {
        &self.face_sq
    }

    pub fn n_cells(&self) -> usize {
        self.r.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.r.len()
    }

    pub fn radius(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// Trapezoid weights of `rho d rho`, summing to `R^2 / 2`.
    pub fn rho_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `s_1 - s_0`, the first interior spacing of the s-grid.
    pub fn first_s_spacing(&self) -> f64 {
        self.s[1]
    }

    /// Largest spacing of the r-grid.
    pub fn max_r_spacing(&self) -> f64 {
        self.r.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the last node with `r_j <= r`.
    pub(crate) fn locate_r(&self, r: f64) -> usize {
        match self.r.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }
}

/// Grid recipe as it appears in configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Uniform { n: usize },
    Geometric { n: usize, first_spacing: f64 },
}

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        match self {
            GridSpec::Uniform { n } | GridSpec::Geometric { n, .. } => *n,
        }
    }

    pub fn with_cells(&self, n_cells: usize) -> GridSpec {
        match self {
            GridSpec::Uniform { .. } => GridSpec::Uniform { n: n_cells },
            GridSpec::Geometric { first_spacing, .. } => GridSpec::Geometric {
                n: n_cells,
                first_spacing: *first_spacing,
            },
        }
    }

    pub fn build(&self, radius: f64) -> Result<RadialGrid> {
        match self {
            GridSpec::Uniform { n } => RadialGrid::uniform(radius, *n),
            GridSpec::Geometric { n, first_spacing } => {
                RadialGrid::geometric(radius, *n, *first_spacing * radius)
            }
        }
    }
}

macro_rules! nodal_field {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn zeros(grid: &RadialGrid) -> Self {
                $name(vec![0.0; grid.n_nodes()])
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn into_values(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn linf(&self) -> f64 {
                self.0.iter().fold(0.0, |a, x| a.max(x.abs()))
            }

            pub fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
                check_len(grid.n_nodes(), self.0.len())
            }
        }
    };
}

nodal_field!(
    /// Density `u` sampled at the r-nodes.
    FieldU
);
nodal_field!(
    /// Cumulative mass `w(s) = int_0^sqrt(s) rho u d rho` at the s-nodes.
    FieldW
);

impl FieldU {
    /// Sample a function of `r` on the grid.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        FieldU(grid.r().iter().map(|&r| f(r)).collect())
    }
}

impl FieldW {
    /// Sample a function of `s` on the grid.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        FieldW(grid.s().iter().map(|&s| f(s)).collect())
    }
}
