//! Fixtures shared by the kernel benchmarks in `benches/`.

use std::f64::consts::PI;

use kslab_core::harness::config::ModelSection;
use kslab_core::initdata::build_initial_data;
use kslab_core::{BumpSpec, FieldU, ModelParams, Profile, RadialGrid};

/// Dichotomy model, uniform grid with `n` cells and a cosine cap of mass
/// `0.9 * 8 pi`.
pub fn dichotomy_fixture(n: usize) -> (ModelParams, RadialGrid, FieldU) {
    let params = ModelSection::dichotomy().build().expect("dichotomy model");
    let grid = RadialGrid::uniform(params.radius, n).expect("grid");
    let spec = BumpSpec {
        m0: 0.9 * 8.0 * PI,
        r1: 0.5,
        m_tilde: 0.3 * 8.0 * PI,
        profile: Profile::CosineCap,
    };
    let u = build_initial_data(&spec, &grid).expect("initial data");
    (params, grid, u)
}
