#![allow(dead_code)]

//! Shared helpers for integration tests: analytic reference solutions and
//! dense error measurement against them.

use std::path::PathBuf;

use obstacle_core::mesh::GridFunction;
use obstacle_core::pipeline::ExperimentConfig;

/// Root of the shipped configuration files.
pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&config_path(name)).expect("shipped config must parse")
}

/// Solution of −u″ = 1, u(0) = u(1) = 0 (obstacle inactive).
pub fn poisson_exact(x: f64) -> f64 {
    0.5 * x * (1.0 - x)
}

/// Contact point of the analytic obstacle solution for f ≡ −8, ψ ≡ −1/2,
/// g ≡ 0 on (0, 1): smooth fit of u″ = 8, u(0) = 0, u(a) = −1/2, u′(a) = 0.
pub const OBSTACLE_CONTACT: f64 = 0.35355339059327373;

/// The piecewise analytic obstacle solution: parabola, flat contact, mirror.
pub fn obstacle_exact(x: f64) -> f64 {
    let a = OBSTACLE_CONTACT;
    if x < a {
        4.0 * x * x - 8.0 * a * x
    } else if x <= 1.0 - a {
        -0.5
    } else {
        let y = 1.0 - x;
        4.0 * y * y - 8.0 * a * y
    }
}

/// Sup difference between the piecewise-linear interpolant and a smooth
/// reference, sampled at nodes and cell midpoints (where the interpolation
/// error of a smooth function peaks).
pub fn sup_error_1d(u: &GridFunction, exact: impl Fn(f64) -> f64) -> f64 {
    let mesh = u.mesh();
    let vals = u.values();
    let mut sup: f64 = 0.0;
    for i in 0..vals.len() {
        let x = mesh.node(i)[0];
        sup = sup.max((vals[i] - exact(x)).abs());
        if i + 1 < vals.len() {
            let xm = 0.5 * (x + mesh.node(i + 1)[0]);
            let um = 0.5 * (vals[i] + vals[i + 1]);
            sup = sup.max((um - exact(xm)).abs());
        }
    }
    sup
}
